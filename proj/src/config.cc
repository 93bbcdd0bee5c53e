// Copyright 2026-present the vecserve project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <algorithm>
#include <sstream>

#include "vecserve/io.h"
#include "vecserve/service.h"

namespace vecserve {

using json = nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(ErrorCode::kConfig, "unknown config key '" + where + key + "'");
    }
  }
}

EncoderDescriptor encoder_from_json(const json& j, EncoderDescriptor d, const std::string& where) {
  reject_unknown(j, {"kind", "name", "dim", "endpoint", "timeout_ms", "max_in_flight", "retries"}, where);
  if (j.contains("kind")) d.kind = parse_encoder_kind(j["kind"].get<std::string>());
  d.name = j.value("name", d.name);
  d.dim = j.value("dim", d.dim);
  d.endpoint = j.value("endpoint", d.endpoint);
  if (j.contains("timeout_ms")) d.timeout = std::chrono::milliseconds(j["timeout_ms"].get<int64_t>());
  d.max_in_flight = j.value("max_in_flight", d.max_in_flight);
  d.retries = j.value("retries", d.retries);
  d.validate();
  return d;
}

}  // namespace

json parse_key_value_config(std::string_view text) {
  json root = json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string raw = trim(std::string_view(stripped).substr(eq + 1));
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    json* node = &root;
    std::size_t start = 0;
    while (true) {
      auto dot = key.find('.', start);
      std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return root;
}

ServeConfig serve_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, "config must be an object");
  reject_unknown(doc,
                 {"store", "graph_index", "ivfpq_index", "vectors", "host", "port", "parallelism",
                  "queue_bound", "drain_timeout_ms", "vote_log", "ui_dir", "registry_capacity",
                  "cache_capacity", "retrieval_encoder", "rerank_encoder", "defaults"},
                 "");
  ServeConfig c;
  try {
    if (!doc.contains("store")) throw Error(ErrorCode::kConfig, "config needs 'store'");
    c.engine.store_dir = resolve(base_dir, doc["store"].get<std::string>());
    if (doc.contains("graph_index")) c.engine.graph_index = resolve(base_dir, doc["graph_index"].get<std::string>());
    if (doc.contains("ivfpq_index")) c.engine.ivfpq_index = resolve(base_dir, doc["ivfpq_index"].get<std::string>());
    if (doc.contains("vectors")) c.engine.vectors = resolve(base_dir, doc["vectors"].get<std::string>());
    if (doc.contains("ui_dir")) c.ui_dir = resolve(base_dir, doc["ui_dir"].get<std::string>());
    if (doc.contains("vote_log")) c.vote_log = resolve(base_dir, doc["vote_log"].get<std::string>());
    c.host = doc.value("host", c.host);
    c.port = doc.value("port", c.port);
    c.parallelism = doc.value("parallelism", c.parallelism);
    c.queue_bound = doc.value("queue_bound", c.queue_bound);
    c.drain_timeout = std::chrono::milliseconds(doc.value("drain_timeout_ms", int64_t{10000}));
    c.registry_capacity = doc.value("registry_capacity", c.registry_capacity);
    c.engine.cache_capacity = doc.value("cache_capacity", c.engine.cache_capacity);

    if (doc.contains("retrieval_encoder")) {
      c.engine.retrieval_encoder =
          encoder_from_json(doc["retrieval_encoder"], c.engine.retrieval_encoder, "retrieval_encoder.");
    }
    EncoderDescriptor rerank = c.engine.retrieval_encoder;
    rerank.role = EncoderRole::kRerank;
    if (doc.contains("rerank_encoder")) rerank = encoder_from_json(doc["rerank_encoder"], rerank, "rerank_encoder.");
    c.engine.rerank_encoder = rerank;
    c.engine.retrieval_encoder.role = EncoderRole::kRetrieval;

    if (doc.contains("defaults")) {
      const auto& d = doc["defaults"];
      reject_unknown(d, {"k", "K", "n_probe", "L", "W", "lambda", "mode"}, "defaults.");
      auto& s = c.engine.defaults;
      s.k = d.value("k", s.k);
      s.K = d.value("K", s.K);
      s.n_probe = d.value("n_probe", s.n_probe);
      s.L = d.value("L", s.L);
      s.W = d.value("W", s.W);
      s.lambda = d.value("lambda", s.lambda);
      if (d.contains("mode")) {
        auto mode = d["mode"].get<std::string>();
        if (mode != "graph" && mode != "ivfpq") throw Error(ErrorCode::kConfig, "defaults.mode must be graph or ivfpq");
        s.mode = mode == "ivfpq" ? SearchMode::kIvfPq : SearchMode::kGraph;
      }
      if (s.k < 1 || s.K < s.k || s.L < 1 || s.W < 1 || s.n_probe < 1 || s.lambda < 0.0 || s.lambda > 1.0) {
        throw Error(ErrorCode::kConfig, "defaults violate search parameter bounds");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  if (c.parallelism < 1 || c.parallelism > 4096) throw Error(ErrorCode::kConfig, "parallelism must be in [1, 4096]");
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kConfig, "port out of range");
  return c;
}

ServeConfig load_serve_config(const std::filesystem::path& path) {
  std::string text = read_file(path);
  auto first = text.find_first_not_of(" \t\r\n");
  json doc;
  if (first != std::string::npos && text[first] == '{') {
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, "cannot parse " + path.string() + ": " + e.what());
    }
  } else {
    doc = parse_key_value_config(text);
  }
  return serve_config_from_json(doc, path.parent_path());
}

}  // namespace vecserve
