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
#include "vecserve/embed.h"

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

namespace vecserve {

using json = nlohmann::json;

namespace {

constexpr uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t fnv1a(std::string_view bytes) {
  uint64_t h = kFnvOffset;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

[[noreturn]] void throw_zero_vector(const std::string& text) {
  std::string shown = text.size() > 64 ? text.substr(0, 64) + "..." : text;
  throw Error(ErrorCode::kZeroVector, "encoder produced a zero vector for text \"" + shown + "\"");
}

}  // namespace

void EncoderDescriptor::validate() const {
  if (dim == 0) throw Error(ErrorCode::kConfig, "encoder '" + name + "' has dim 0");
  if (kind == EncoderKind::kRemote && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "remote encoder '" + name + "' requires an endpoint");
  }
  if (max_in_flight == 0 || max_in_flight > 1024) {
    throw Error(ErrorCode::kConfig, "max_in_flight must be in [1, 1024]");
  }
}

std::vector<float> Encoder::encode_one(const std::string& text) const {
  Matrix m = encode({text});
  auto row = m.row(0);
  return {row.begin(), row.end()};
}

ReferenceEncoder::ReferenceEncoder(EncoderDescriptor descriptor) : descriptor_(std::move(descriptor)) {
  descriptor_.kind = EncoderKind::kReference;
  descriptor_.validate();
}

ReferenceEncoder::ReferenceEncoder(uint32_t dim) : ReferenceEncoder([&] {
    EncoderDescriptor d;
    d.dim = dim;
    return d;
  }()) {}

std::vector<float> ReferenceEncoder::features(std::string_view text) const {
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back(' ');
  for (char c : text) padded.push_back(ascii_lower(c));
  padded.push_back(' ');

  std::vector<float> v(descriptor_.dim, 0.0f);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    uint64_t h = fnv1a(std::string_view(padded).substr(i, 3));
    std::size_t bucket = static_cast<std::size_t>(h % descriptor_.dim);
    v[bucket] += (h >> 63) ? -1.0f : 1.0f;
  }
  return v;
}

Matrix ReferenceEncoder::encode(const std::vector<std::string>& texts) const {
  Matrix out(texts.size(), descriptor_.dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty text");
    auto v = features(texts[i]);
    if (!normalize(v)) throw_zero_vector(texts[i]);
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

RemoteEncoder::RemoteEncoder(EncoderDescriptor descriptor)
    : descriptor_(std::move(descriptor)), in_flight_(descriptor_.max_in_flight) {
  descriptor_.kind = EncoderKind::kRemote;
  descriptor_.validate();
  const std::string& url = descriptor_.endpoint;
  auto scheme_end = url.find("://");
  auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  scheme_host_port_ = url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

RemoteEncoder::~RemoteEncoder() = default;

Matrix RemoteEncoder::encode(const std::vector<std::string>& texts) const {
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty text");
  }
  if (texts.empty()) return Matrix(0, descriptor_.dim);

  const std::string body = json{{"texts", texts}}.dump();
  const std::string path = base_path_ + "/embed";
  const uint32_t attempts_allowed = descriptor_.retries + 1;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  httplib::Client client(scheme_host_port_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(descriptor_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(descriptor_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  int last_status = 0;
  std::string last_error;
  for (uint32_t attempt = 1; attempt <= attempts_allowed; ++attempt) {
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
    } else if (res->status != 200) {
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status < 500 && res->status != 429) {
        throw RemoteEncoderError("remote encoder '" + descriptor_.name + "' rejected request: " +
                                     last_error, last_status, attempt, false);
      }
    } else {
      json reply;
      try {
        reply = json::parse(res->body);
      } catch (const json::exception& e) {
        throw RemoteEncoderError("remote encoder returned invalid JSON: " + std::string(e.what()),
                                 res->status, attempt, false);
      }
      const auto& vectors = reply.value("vectors", json::array());
      uint32_t dim = reply.value("dim", 0u);
      if (dim != descriptor_.dim || vectors.size() != texts.size()) {
        throw RemoteEncoderError("remote encoder returned " + std::to_string(vectors.size()) +
                                     " vectors of dim " + std::to_string(dim) + ", expected " +
                                     std::to_string(texts.size()) + " of dim " +
                                     std::to_string(descriptor_.dim),
                                 res->status, attempt, false);
      }
      Matrix out(texts.size(), dim);
      for (std::size_t i = 0; i < texts.size(); ++i) {
        auto row = out.row(i);
        if (!vectors[i].is_array() || vectors[i].size() != dim) {
          throw RemoteEncoderError("remote vector " + std::to_string(i) + " has wrong shape",
                                   res->status, attempt, false);
        }
        for (uint32_t d = 0; d < dim; ++d) {
          if (!vectors[i][d].is_number()) {
            throw RemoteEncoderError("remote vector " + std::to_string(i) + " has a non-numeric value",
                                     res->status, attempt, false);
          }
          row[d] = vectors[i][d].get<float>();
        }
        if (!normalize(row)) throw_zero_vector(texts[i]);
      }
      return out;
    }
    if (attempt < attempts_allowed) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50) * attempt);
    }
  }
  throw RemoteEncoderError("remote encoder '" + descriptor_.name + "' at " + descriptor_.endpoint +
                               " failed after " + std::to_string(attempts_allowed) +
                               " attempts: " + last_error,
                           last_status, attempts_allowed, true);
}

std::unique_ptr<Encoder> make_encoder(const EncoderDescriptor& descriptor) {
  switch (descriptor.kind) {
    case EncoderKind::kReference:
      return std::make_unique<ReferenceEncoder>(descriptor);
    case EncoderKind::kRemote:
      return std::make_unique<RemoteEncoder>(descriptor);
  }
  throw Error(ErrorCode::kConfig, "unknown encoder kind");
}

std::string_view encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::kRemote ? "remote" : "reference";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "reference") return EncoderKind::kReference;
  if (name == "remote") return EncoderKind::kRemote;
  throw Error(ErrorCode::kConfig, "unknown encoder kind '" + std::string(name) + "'");
}

}  // namespace vecserve
