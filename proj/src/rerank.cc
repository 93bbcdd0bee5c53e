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
#include "vecserve/rerank.h"

#include <algorithm>
#include <limits>
#include <unordered_set>

namespace vecserve {

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kAnn:
      return "ann";
    case Stage::kExact:
      return "exact";
    case Stage::kMmr:
      return "mmr";
  }
  return "ann";
}

std::vector<ScoredHit> to_scored_hits(std::span<const Hit> hits, Stage stage, std::size_t limit) {
  std::vector<ScoredHit> out;
  const std::size_t n = std::min(limit, hits.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({hits[i].id, hits[i].score, stage, static_cast<uint32_t>(i + 1)});
  }
  return out;
}

RerankCache::RerankCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::kConfig, "rerank cache capacity must be >= 1");
}

std::optional<std::vector<float>> RerankCache::get(ChunkId id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

void RerankCache::put(ChunkId id, std::vector<float> vector) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it != index_.end()) {
    it->second->second = std::move(vector);
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  order_.emplace_front(id, std::move(vector));
  index_[id] = order_.begin();
  while (order_.size() > capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
}

std::size_t RerankCache::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

uint64_t RerankCache::total_hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

uint64_t RerankCache::total_misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

void RerankCache::clear() {
  std::lock_guard lock(mu_);
  order_.clear();
  index_.clear();
}

ExactRerankResult exact_rerank(std::string_view query_text, std::span<const Hit> candidates,
                               std::size_t k, const Encoder& rerank_encoder, RerankCache& cache,
                               const ChunkStore& store) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  {
    std::unordered_set<ChunkId> seen;
    for (const Hit& h : candidates) {
      if (!seen.insert(h.id).second) {
        throw Error(ErrorCode::kInvalidArgument,
                    "duplicate candidate id " + std::to_string(h.id) + " passed to exact rerank");
      }
    }
  }

  ExactRerankResult result;
  std::vector<std::vector<float>> vectors(candidates.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (auto cached = cache.get(candidates[i].id)) {
      vectors[i] = std::move(*cached);
      ++result.cache_hits;
    } else {
      missing.push_back(i);
      ++result.cache_misses;
    }
  }

  std::vector<float> query;
  try {
    query = rerank_encoder.encode_one(std::string(query_text));
    if (!missing.empty()) {
      std::vector<std::string> texts;
      texts.reserve(missing.size());
      for (std::size_t i : missing) texts.push_back(store.text(candidates[i].id));
      Matrix encoded = rerank_encoder.encode(texts);
      for (std::size_t j = 0; j < missing.size(); ++j) {
        auto row = encoded.row(j);
        vectors[missing[j]].assign(row.begin(), row.end());
        cache.put(candidates[missing[j]].id, vectors[missing[j]]);
      }
    }
  } catch (const RemoteEncoderError& e) {
    throw RerankUnavailable(std::string("exact rerank unavailable: ") + e.what(),
                            to_scored_hits(candidates, Stage::kAnn, k));
  }

  TopK top(k);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    top.push({candidates[i].id, similarity(query, vectors[i])});
  }
  auto ranked = std::move(top).take_sorted();
  result.hits = to_scored_hits(ranked, Stage::kExact, k);
  return result;
}

std::vector<ScoredHit> mmr_select(VectorView query, std::span<const MmrCandidate> candidates,
                                  std::size_t k, double lambda) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "MMR needs at least one candidate");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "lambda must be in [0, 1]");
  }
  const std::size_t n = candidates.size();
  std::vector<float> relevance(n);
  for (std::size_t i = 0; i < n; ++i) relevance[i] = similarity(query, candidates[i].vector);

  std::vector<float> redundancy(n, -std::numeric_limits<float>::infinity());
  std::vector<bool> taken(n, false);
  std::vector<ScoredHit> out;
  const std::size_t want = std::min(k, n);
  out.reserve(want);

  while (out.size() < want) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      // Empty selected set: the redundancy term is 0 and the pick is pure relevance.
      double score = out.empty() ? static_cast<double>(relevance[i])
                                 : lambda * relevance[i] - (1.0 - lambda) * redundancy[i];
      if (best == n || score > best_score ||
          (score == best_score && candidates[i].id < candidates[best].id)) {
        best = i;
        best_score = score;
      }
    }
    if (out.empty()) best_score = lambda * relevance[best];
    taken[best] = true;
    out.push_back({candidates[best].id, static_cast<float>(best_score), Stage::kMmr,
                   static_cast<uint32_t>(out.size() + 1)});
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      redundancy[i] = std::max(redundancy[i], similarity(candidates[i].vector, candidates[best].vector));
    }
  }
  return out;
}

}  // namespace vecserve
