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
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vecserve/corpus.h"
#include "vecserve/embed.h"
#include "vecserve/ivfpq.h"
#include "vecserve/rerank.h"
#include "vecserve/vamana.h"

namespace vecserve {

enum class SearchMode { kGraph, kIvfPq };

std::string_view mode_name(SearchMode mode);

/// Default search parameters; every field can be overridden per request.
struct SearchDefaults {
  uint32_t k = 10;
  uint32_t K = 1000;
  uint32_t n_probe = 256;
  uint32_t L = 128;
  uint32_t W = 4;
  double lambda = 0.5;
  SearchMode mode = SearchMode::kGraph;
};

struct SearchRequest {
  std::string query;
  uint32_t k = 10;
  SearchMode mode = SearchMode::kGraph;
  bool exact = false;
  bool diverse = false;
  uint32_t K = 1000;
  uint32_t n_probe = 256;
  uint32_t L = 128;
  uint32_t W = 4;
  double lambda = 0.5;

  // Which optional fields the caller set explicitly.
  bool n_probe_set = false;
  bool L_set = false;
  bool W_set = false;
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Result of parsing a request body: either a request or field errors.
struct ParsedRequest {
  std::optional<SearchRequest> request;
  std::vector<FieldError> errors;
  std::vector<std::string> warnings;
};

/// Checks types and the bounds k >= 1, K >= k, 0 <= lambda <= 1, W >= 1,
/// L >= 1, n_probe >= 1. Parameters that do not apply to the chosen mode
/// are ignored with a warning.
ParsedRequest parse_search_request(const nlohmann::json& body, const SearchDefaults& defaults);

struct ResponseHit {
  uint32_t rank = 0;
  ChunkId chunk_id = 0;
  std::string doc_id;
  std::string source;
  std::string text;
  float score = 0.0f;
  Stage stage = Stage::kAnn;
};

struct StageTimings {
  double ann_ms = 0.0;
  double exact_ms = 0.0;
  double mmr_ms = 0.0;
  double total_ms = 0.0;
};

struct SearchResponse {
  std::string query_id;
  std::vector<ResponseHit> hits;
  StageTimings timings;
  uint64_t cache_hits = 0;
  uint64_t cache_misses = 0;
  std::vector<std::string> warnings;
  // Parameters actually used, e.g. L raised to the candidate count.
  nlohmann::json effective_params;
  bool degraded = false;
};

nlohmann::json to_json(const SearchResponse& response);

struct EngineConfig {
  std::filesystem::path store_dir;
  std::optional<std::filesystem::path> graph_index;
  std::optional<std::filesystem::path> ivfpq_index;
  // Retrieval vectors; used for diverse search when no graph is loaded.
  std::optional<std::filesystem::path> vectors;
  EncoderDescriptor retrieval_encoder;
  EncoderDescriptor rerank_encoder;
  std::size_t cache_capacity = 1'000'000;
  SearchDefaults defaults;
};

/// Loaded, immutable search state plus the rerank cache. `search` is safe
/// to call from any number of threads.
class Engine {
 public:
  /// Opens every configured artifact; the graph is memory-mapped. Errors
  /// name the artifact that failed.
  explicit Engine(EngineConfig config);
  // Wires pre-built parts together; used by tests and the Python module.
  Engine(EngineConfig config, std::unique_ptr<Encoder> retrieval, std::unique_ptr<Encoder> rerank);

  SearchResponse search(const SearchRequest& request) const;

  bool has_mode(SearchMode mode) const;
  const ChunkStore& store() const { return *store_; }
  const RerankCache& cache() const { return cache_; }
  RerankCache& cache() { return cache_; }
  const EngineConfig& config() const { return config_; }
  const Encoder& retrieval_encoder() const { return *retrieval_; }
  const Encoder& rerank_encoder() const { return *rerank_; }
  const MappedVamanaGraph* graph() const { return graph_.get(); }
  const IvfPqIndex* ivfpq() const { return ivfpq_.get(); }

  nlohmann::json describe() const;

 private:
  void open_artifacts();
  VectorView retrieval_vector(ChunkId id) const;

  EngineConfig config_;
  std::unique_ptr<ChunkStore> store_;
  std::unique_ptr<MappedVamanaGraph> graph_;
  std::unique_ptr<IvfPqIndex> ivfpq_;
  std::unique_ptr<VectorFile> vectors_;
  std::unique_ptr<Encoder> retrieval_;
  std::unique_ptr<Encoder> rerank_;
  mutable RerankCache cache_;
};

/// Random 128-bit token, hex encoded.
std::string new_query_id();

}  // namespace vecserve
