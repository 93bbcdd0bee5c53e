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
#include <filesystem>
#include <vector>

#include "vecserve/hits.h"
#include "vecserve/vectors.h"

namespace vecserve {

/// 4 * sqrt(n) rounded to the nearest power of two, clamped to [16, 65536]
/// and never above n.
uint32_t default_n_lists(std::size_t n);

struct IvfPqParams {
  uint32_t n_lists = 0;  // 0: default_n_lists(N)
  uint32_t m = 8;
  uint64_t seed = 42;
  // Test mode: store full-precision vectors instead of PQ codes, making
  // an exhaustive probe equal to brute force.
  bool exact_codes = false;
  // Cap on training points (0: max(256, 40 * n_lists)).
  std::size_t max_train_points = 0;
};

/// Inverted-file index with residual product quantization.
///
/// Vectors are routed to the nearest of `n_lists` coarse centroids
/// (spherical k-means, so nearest-by-L2 equals largest inner product for
/// unit-norm data). The residual `x - c` is split into `m` sub-vectors and
/// each is replaced by the index of its nearest of 256 sub-centroids. At
/// query time the `n_probe` lists whose centroids have the largest inner
/// product with the query are scanned, scoring each code as
/// `q.c + sum_s table[s][code[s]]` with per-query lookup tables.
class IvfPqIndex {
 public:
  static constexpr uint32_t kCodebookSize = 256;

  /// Trains the coarse quantizer and PQ codebooks on (a seeded sample of)
  /// `vectors`. Throws ConfigError when N < n_lists, dim % m != 0 or the
  /// sample has fewer than 256 points.
  static IvfPqIndex train(const Matrix& vectors, const IvfPqParams& params);

  /// Throws DuplicateId if the id was already added and DimensionError on
  /// a dimension mismatch.
  void add(ChunkId id, VectorView vector);
  // Adds row i with id i.
  void add_all(const Matrix& vectors);

  /// Top min(k, scanned) hits by approximate score. Throws ConfigError when
  /// n_probe is outside [1, n_lists] or k is 0.
  std::vector<Hit> search(VectorView query, std::size_t k, uint32_t n_probe) const;

  /// Coarse centroid plus decoded sub-codewords for an added id.
  std::vector<float> reconstruct(ChunkId id) const;
  /// Score of one stored id via the lookup-table path.
  float adc_score(VectorView query, ChunkId id) const;

  void save(const std::filesystem::path& path) const;
  static IvfPqIndex load(const std::filesystem::path& path);

  std::size_t size() const { return total_; }
  std::size_t dim() const { return dim_; }
  uint32_t n_lists() const { return static_cast<uint32_t>(centroids_.rows()); }
  uint32_t m() const { return m_; }
  bool exact_codes() const { return exact_codes_; }
  uint64_t seed() const { return seed_; }
  const Matrix& centroids() const { return centroids_; }
  // Codebook s is rows [s*256, (s+1)*256) of a 256*m x sub_dim matrix.
  const Matrix& codebooks() const { return codebooks_; }
  double coarse_inertia() const { return coarse_inertia_; }
  // Per-point squared residual quantization error over the training sample.
  double train_distortion_mean() const { return distortion_mean_; }
  double train_distortion_max() const { return distortion_max_; }
  const std::vector<ChunkId>& list_ids(uint32_t list) const { return lists_[list].ids; }

 private:
  struct InvertedList {
    std::vector<ChunkId> ids;
    std::vector<uint8_t> codes;  // code_size() bytes per entry
  };

  IvfPqIndex() = default;
  std::size_t sub_dim() const { return dim_ / m_; }
  std::size_t code_size() const { return exact_codes_ ? dim_ * sizeof(float) : m_; }
  void encode_residual(VectorView residual, uint8_t* code) const;
  float scan_code(const float* tables, float base, const uint8_t* code, VectorView query) const;
  void locate(ChunkId id, uint32_t& list, std::size_t& pos) const;

  std::size_t dim_ = 0;
  uint32_t m_ = 0;
  bool exact_codes_ = false;
  uint64_t seed_ = 0;
  Matrix centroids_;
  Matrix codebooks_;
  double coarse_inertia_ = 0.0;
  double distortion_mean_ = 0.0;
  double distortion_max_ = 0.0;
  std::vector<InvertedList> lists_;
  std::vector<bool> present_;
  std::size_t total_ = 0;
};

}  // namespace vecserve
