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
#include "vecserve/engine.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <random>

namespace vecserve {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from, Clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

[[noreturn]] void artifact_error(const std::string& name, const std::filesystem::path& path,
                                 const Error& cause) {
  throw Error(cause.code(), "artifact '" + name + "' (" + path.string() + "): " + cause.what());
}

std::vector<Hit> as_hits(const std::vector<ScoredHit>& hits) {
  std::vector<Hit> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back({h.chunk_id, h.score});
  return out;
}

void validate(const SearchRequest& r) {
  if (r.query.empty()) throw Error(ErrorCode::kInvalidArgument, "query must be non-empty");
  if (r.k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (r.K < r.k) throw Error(ErrorCode::kInvalidArgument, "K must be >= k");
  if (!(r.lambda >= 0.0 && r.lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be in [0, 1]");
  }
  if (r.L < 1 || r.W < 1 || r.n_probe < 1) {
    throw Error(ErrorCode::kInvalidArgument, "L, W and n_probe must be >= 1");
  }
}

}  // namespace

std::string_view mode_name(SearchMode mode) {
  return mode == SearchMode::kIvfPq ? "ivfpq" : "graph";
}

ParsedRequest parse_search_request(const json& body, const SearchDefaults& defaults) {
  ParsedRequest parsed;
  if (!body.is_object()) {
    parsed.errors.push_back({"", "request body must be a JSON object"});
    return parsed;
  }
  SearchRequest r;
  r.k = defaults.k;
  r.K = defaults.K;
  r.n_probe = defaults.n_probe;
  r.L = defaults.L;
  r.W = defaults.W;
  r.lambda = defaults.lambda;
  r.mode = defaults.mode;

  auto error = [&](const std::string& field, const std::string& message) {
    parsed.errors.push_back({field, message});
  };
  auto read_count = [&](const char* field, uint32_t& out, uint32_t min) -> bool {
    if (!body.contains(field)) return false;
    const auto& v = body[field];
    if (!v.is_number_integer()) {
      error(field, "must be an integer");
      return true;
    }
    auto value = v.get<int64_t>();
    if (value < static_cast<int64_t>(min) || value > std::numeric_limits<uint32_t>::max()) {
      error(field, "must be >= " + std::to_string(min));
      return true;
    }
    out = static_cast<uint32_t>(value);
    return true;
  };
  auto read_bool = [&](const char* field, bool& out) {
    if (!body.contains(field)) return;
    if (!body[field].is_boolean()) {
      error(field, "must be a boolean");
      return;
    }
    out = body[field].get<bool>();
  };

  if (!body.contains("query") || !body["query"].is_string()) {
    error("query", "required string");
  } else {
    r.query = body["query"].get<std::string>();
    if (r.query.find_first_not_of(" \t\r\n") == std::string::npos) error("query", "must be non-empty");
  }
  if (body.contains("mode")) {
    const auto& m = body["mode"];
    if (m == "graph") {
      r.mode = SearchMode::kGraph;
    } else if (m == "ivfpq") {
      r.mode = SearchMode::kIvfPq;
    } else {
      error("mode", "must be \"graph\" or \"ivfpq\"");
    }
  }
  read_count("k", r.k, 1);
  read_count("K", r.K, 1);
  r.n_probe_set = read_count("n_probe", r.n_probe, 1);
  r.L_set = read_count("L", r.L, 1);
  r.W_set = read_count("W", r.W, 1);
  read_bool("exact", r.exact);
  read_bool("diverse", r.diverse);
  if (body.contains("lambda")) {
    const auto& v = body["lambda"];
    if (!v.is_number()) {
      error("lambda", "must be a number");
    } else {
      r.lambda = v.get<double>();
      if (!(r.lambda >= 0.0 && r.lambda <= 1.0)) error("lambda", "must be in [0, 1]");
    }
  }
  if (r.K < r.k) error("K", "must be >= k");

  static const std::vector<std::string> known = {"query", "k",       "mode", "exact", "diverse",
                                                 "K",     "n_probe", "L",    "W",     "lambda"};
  for (const auto& [key, value] : body.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      parsed.warnings.push_back("unknown field '" + key + "' ignored");
    }
  }
  if (r.mode == SearchMode::kGraph && r.n_probe_set) {
    parsed.warnings.push_back("n_probe applies to ivfpq mode only; ignored");
  }
  if (r.mode == SearchMode::kIvfPq && (r.L_set || r.W_set)) {
    parsed.warnings.push_back("L and W apply to graph mode only; ignored");
  }
  if (parsed.errors.empty()) parsed.request = r;
  return parsed;
}

json to_json(const SearchResponse& response) {
  json hits = json::array();
  for (const auto& h : response.hits) {
    hits.push_back({{"rank", h.rank},
                    {"chunk_id", h.chunk_id},
                    {"doc_id", h.doc_id},
                    {"source", h.source},
                    {"text", h.text},
                    {"score", h.score},
                    {"stage", stage_name(h.stage)}});
  }
  return {{"query_id", response.query_id},
          {"hits", std::move(hits)},
          {"timings",
           {{"ann_ms", response.timings.ann_ms},
            {"exact_ms", response.timings.exact_ms},
            {"mmr_ms", response.timings.mmr_ms},
            {"total_ms", response.timings.total_ms}}},
          {"cache", {{"hits", response.cache_hits}, {"misses", response.cache_misses}}},
          {"warnings", response.warnings},
          {"params", response.effective_params},
          {"degraded", response.degraded}};
}

Engine::Engine(EngineConfig config) : config_(std::move(config)), cache_(config_.cache_capacity) {
  try {
    retrieval_ = make_encoder(config_.retrieval_encoder);
    rerank_ = make_encoder(config_.rerank_encoder);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("encoder configuration: ") + e.what());
  }
  open_artifacts();
}

Engine::Engine(EngineConfig config, std::unique_ptr<Encoder> retrieval, std::unique_ptr<Encoder> rerank)
    : config_(std::move(config)),
      retrieval_(std::move(retrieval)),
      rerank_(std::move(rerank)),
      cache_(config_.cache_capacity) {
  config_.retrieval_encoder = retrieval_->descriptor();
  config_.rerank_encoder = rerank_->descriptor();
  open_artifacts();
}

void Engine::open_artifacts() {
  try {
    store_ = std::make_unique<ChunkStore>(config_.store_dir);
  } catch (const Error& e) {
    artifact_error("store", config_.store_dir, e);
  }
  if (config_.graph_index) {
    try {
      graph_ = std::make_unique<MappedVamanaGraph>(*config_.graph_index);
    } catch (const Error& e) {
      artifact_error("graph_index", *config_.graph_index, e);
    }
  }
  if (config_.ivfpq_index) {
    try {
      ivfpq_ = std::make_unique<IvfPqIndex>(IvfPqIndex::load(*config_.ivfpq_index));
    } catch (const Error& e) {
      artifact_error("ivfpq_index", *config_.ivfpq_index, e);
    }
  }
  if (config_.vectors) {
    try {
      vectors_ = std::make_unique<VectorFile>(*config_.vectors);
    } catch (const Error& e) {
      artifact_error("vectors", *config_.vectors, e);
    }
  }
  if (!graph_ && !ivfpq_) throw Error(ErrorCode::kConfig, "no index configured: need graph_index and/or ivfpq_index");

  auto check = [&](const char* name, std::size_t count, std::size_t dim) {
    if (dim != retrieval_->dim()) {
      throw Error(ErrorCode::kDimension, std::string("artifact '") + name + "' has dim " +
                                             std::to_string(dim) + " but the retrieval encoder has dim " +
                                             std::to_string(retrieval_->dim()));
    }
    if (count != store_->size()) {
      throw Error(ErrorCode::kConfig, std::string("artifact '") + name + "' holds " +
                                          std::to_string(count) + " vectors but the store has " +
                                          std::to_string(store_->size()) + " chunks");
    }
  };
  if (graph_) check("graph_index", graph_->size(), graph_->dim());
  if (ivfpq_) check("ivfpq_index", ivfpq_->size(), ivfpq_->dim());
  if (vectors_) check("vectors", vectors_->count(), vectors_->dim());
}

bool Engine::has_mode(SearchMode mode) const {
  return mode == SearchMode::kGraph ? graph_ != nullptr : ivfpq_ != nullptr;
}

VectorView Engine::retrieval_vector(ChunkId id) const {
  if (graph_) return graph_->vector(static_cast<uint32_t>(id));
  return vectors_->row(id);
}

SearchResponse Engine::search(const SearchRequest& request) const {
  validate(request);
  if (!has_mode(request.mode)) {
    throw Error(ErrorCode::kModeUnavailable,
                "mode '" + std::string(mode_name(request.mode)) + "' is not loaded on this server");
  }
  if (request.diverse && !graph_ && !vectors_) {
    throw Error(ErrorCode::kModeUnavailable, "diverse search needs the graph index or a vector file");
  }

  SearchResponse response;
  response.query_id = new_query_id();
  const auto t_start = Clock::now();

  const std::vector<float> query = retrieval_->encode_one(request.query);
  const uint32_t n_ann = (request.exact || request.diverse) ? request.K : request.k;

  json params = {{"mode", mode_name(request.mode)},
                 {"k", request.k},
                 {"exact", request.exact},
                 {"diverse", request.diverse}};
  std::vector<Hit> pool;
  if (request.mode == SearchMode::kGraph) {
    BeamSearchParams bp;
    bp.k = n_ann;
    bp.L = std::max(request.L, n_ann);
    bp.W = std::min(request.W, bp.L);
    if (bp.L != request.L) {
      response.warnings.push_back("L raised to " + std::to_string(bp.L) + " to retrieve " +
                                  std::to_string(n_ann) + " candidates");
    }
    pool = graph_->search(query, bp);
    params["L"] = bp.L;
    params["W"] = bp.W;
  } else {
    uint32_t n_probe = request.n_probe;
    if (n_probe > ivfpq_->n_lists()) {
      if (request.n_probe_set) {
        throw Error(ErrorCode::kInvalidArgument, "n_probe must be <= n_lists (" +
                                                     std::to_string(ivfpq_->n_lists()) + ")");
      }
      n_probe = ivfpq_->n_lists();
      response.warnings.push_back("default n_probe clamped to n_lists=" + std::to_string(n_probe));
    }
    pool = ivfpq_->search(query, n_ann, n_probe);
    params["n_probe"] = n_probe;
  }
  if (request.exact || request.diverse) params["K"] = request.K;
  if (request.diverse) params["lambda"] = request.lambda;
  const auto t_ann = Clock::now();
  response.timings.ann_ms = elapsed_ms(t_start, t_ann);

  std::vector<ScoredHit> final_hits;
  if (request.exact) {
    const std::size_t keep = request.diverse ? pool.size() : request.k;
    try {
      auto reranked = exact_rerank(request.query, pool, keep, *rerank_, cache_, *store_);
      response.cache_hits = reranked.cache_hits;
      response.cache_misses = reranked.cache_misses;
      final_hits = std::move(reranked.hits);
      pool = as_hits(final_hits);
    } catch (const RerankUnavailable& e) {
      response.degraded = true;
      response.warnings.push_back(e.what());
      final_hits = e.fallback();
    }
  }
  const auto t_exact = Clock::now();
  if (request.exact) response.timings.exact_ms = elapsed_ms(t_ann, t_exact);

  if (request.diverse && !pool.empty()) {
    std::vector<MmrCandidate> candidates;
    candidates.reserve(pool.size());
    for (const Hit& h : pool) candidates.push_back({h.id, retrieval_vector(h.id)});
    final_hits = mmr_select(query, candidates, request.k, request.lambda);
    response.timings.mmr_ms = elapsed_ms(t_exact, Clock::now());
  } else if (!request.exact) {
    final_hits = to_scored_hits(pool, Stage::kAnn, request.k);
  }
  if (final_hits.size() > request.k) final_hits.resize(request.k);

  response.hits.reserve(final_hits.size());
  for (const auto& h : final_hits) {
    Chunk chunk = store_->lookup(h.chunk_id);
    response.hits.push_back({h.rank, h.chunk_id, std::move(chunk.doc_id), std::move(chunk.source),
                             std::move(chunk.text), h.score, h.stage});
  }
  response.effective_params = std::move(params);
  response.timings.total_ms = elapsed_ms(t_start, Clock::now());
  return response;
}

json Engine::describe() const {
  json indexes = json::object();
  if (graph_) {
    indexes["graph"] = {{"path", config_.graph_index->string()},
                        {"N", graph_->size()},
                        {"dim", graph_->dim()},
                        {"R", graph_->max_degree()},
                        {"L_build", graph_->L_build()},
                        {"alpha", graph_->alpha()},
                        {"seed", graph_->seed()},
                        {"entry_point", graph_->entry_point()}};
  }
  if (ivfpq_) {
    indexes["ivfpq"] = {{"path", config_.ivfpq_index->string()},
                        {"N", ivfpq_->size()},
                        {"dim", ivfpq_->dim()},
                        {"n_lists", ivfpq_->n_lists()},
                        {"m", ivfpq_->m()},
                        {"seed", ivfpq_->seed()},
                        {"exact_codes", ivfpq_->exact_codes()}};
  }
  auto encoder_json = [](const EncoderDescriptor& d) {
    return json{{"name", d.name}, {"dim", d.dim}, {"kind", encoder_kind_name(d.kind)}, {"endpoint", d.endpoint}};
  };
  json modes = json::array();
  if (graph_) modes.push_back("graph");
  if (ivfpq_) modes.push_back("ivfpq");
  return {{"corpus_size", store_->size()},
          {"modes", modes},
          {"indexes", indexes},
          {"encoders",
           {{"retrieval", encoder_json(retrieval_->descriptor())},
            {"rerank", encoder_json(rerank_->descriptor())}}}};
}

std::string new_query_id() {
  thread_local std::mt19937_64 rng([] {
    std::random_device rd;
    std::seed_seq seq{rd(), rd(), rd(), rd()};
    std::mt19937_64 g(seq);
    return g;
  }());
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace vecserve
