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

#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vecserve/corpus.h"
#include "vecserve/embed.h"
#include "vecserve/hits.h"

namespace vecserve {

enum class Stage { kAnn, kExact, kMmr };

std::string_view stage_name(Stage stage);

/// One returned result. Ranks run 1..k. For ann and exact hits the scores
/// are non-increasing in rank; mmr hits are in selection order and carry
/// the marginal score they were selected with.
struct ScoredHit {
  ChunkId chunk_id = 0;
  float score = 0.0f;
  Stage stage = Stage::kAnn;
  uint32_t rank = 0;

  friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

std::vector<ScoredHit> to_scored_hits(std::span<const Hit> hits, Stage stage, std::size_t limit);

/// LRU map from chunk id to rerank-encoder vector. All operations take one
/// mutex; lookups update recency, so there is no read-only path.
class RerankCache {
 public:
  explicit RerankCache(std::size_t capacity = 1'000'000);

  std::optional<std::vector<float>> get(ChunkId id);
  void put(ChunkId id, std::vector<float> vector);

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  uint64_t total_hits() const;
  uint64_t total_misses() const;
  void clear();

 private:
  using Entry = std::pair<ChunkId, std::vector<float>>;

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> order_;  // front = most recently used
  std::unordered_map<ChunkId, std::list<Entry>::iterator> index_;
  uint64_t hits_ = 0;
  uint64_t misses_ = 0;
};

struct ExactRerankResult {
  std::vector<ScoredHit> hits;
  uint64_t cache_hits = 0;
  uint64_t cache_misses = 0;
};

/// The rerank encoder failed. `fallback()` holds the ANN top-k, unchanged,
/// for callers that prefer degraded results over an error.
class RerankUnavailable : public Error {
 public:
  RerankUnavailable(const std::string& message, std::vector<ScoredHit> fallback)
      : Error(ErrorCode::kRerankUnavailable, message), fallback_(std::move(fallback)) {}

  const std::vector<ScoredHit>& fallback() const { return fallback_; }

 private:
  std::vector<ScoredHit> fallback_;
};

/// Re-scores the ANN candidates (in ANN order) with the rerank encoder and
/// returns the top min(k, |candidates|) by exact similarity, ties by
/// ascending id. Candidate vectors come from `cache`; misses are encoded
/// from the chunk text in one batch and inserted.
ExactRerankResult exact_rerank(std::string_view query_text, std::span<const Hit> candidates,
                               std::size_t k, const Encoder& rerank_encoder, RerankCache& cache,
                               const ChunkStore& store);

struct MmrCandidate {
  ChunkId id;
  VectorView vector;
};

/// Greedy maximal-marginal-relevance selection. The first pick maximises
/// sim(q, d); every later pick maximises
///
///   lambda * sim(q, d_i) - (1 - lambda) * max_{j in selected} sim(d_i, d_j)
///
/// Ties go to the smaller id. Returns min(k, |candidates|) hits in
/// selection order.
std::vector<ScoredHit> mmr_select(VectorView query, std::span<const MmrCandidate> candidates,
                                  std::size_t k, double lambda);

}  // namespace vecserve
