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
#include <span>
#include <vector>

#include "vecserve/hits.h"
#include "vecserve/io.h"
#include "vecserve/vectors.h"

namespace vecserve {

struct VamanaParams {
  uint32_t R = 64;
  uint32_t L_build = 128;
  float alpha = 1.2f;
  uint64_t seed = 42;
  uint32_t threads = 1;
  // Upper bound on memory the build may use; 0 means 90% of physical RAM.
  std::size_t memory_budget_bytes = 0;

  void validate(std::size_t n) const;
};

/// L is the candidate list capacity (search complexity), W the number of
/// unexpanded candidates expanded per round (beam width).
struct BeamSearchParams {
  uint32_t L = 128;
  uint32_t W = 4;
  uint32_t k = 10;

  void validate() const;
};

struct BeamSearchStats {
  uint32_t rounds = 0;
  uint32_t expanded = 0;
  uint32_t scored = 0;
};

/// Fully resident Vamana graph: full-precision vectors plus fixed-capacity
/// adjacency arrays.
class VamanaGraph {
 public:
  /// Randomised R-regular initialisation followed by two insertion passes
  /// (alpha = 1, then alpha = params.alpha). Nodes are processed in a
  /// seeded random order, in fixed-size batches: every node of a batch
  /// searches the graph as it stood at the start of the batch, and the
  /// resulting edges are applied in order. Output does not depend on the
  /// thread count.
  static VamanaGraph build(const Matrix& vectors, const VamanaParams& params);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  uint32_t max_degree() const { return R_; }
  uint32_t entry_point() const { return entry_point_; }
  float alpha() const { return alpha_; }
  uint64_t seed() const { return seed_; }
  uint32_t L_build() const { return L_build_; }

  VectorView vector(uint32_t node) const { return vectors_.row(node); }
  std::span<const uint32_t> neighbors(uint32_t node) const {
    return {adjacency_.data() + std::size_t{node} * R_, degrees_[node]};
  }

  std::vector<Hit> search(VectorView query, const BeamSearchParams& params,
                          BeamSearchStats* stats = nullptr) const;

  void save(const std::filesystem::path& path) const;
  /// Reads the whole file into memory after validating it.
  static VamanaGraph load(const std::filesystem::path& path);

 private:
  friend class VamanaBuilder;
  VamanaGraph() = default;

  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  uint32_t R_ = 0;
  uint32_t entry_point_ = 0;
  float alpha_ = 1.0f;
  uint64_t seed_ = 0;
  uint32_t L_build_ = 0;
  Matrix vectors_;
  std::vector<uint32_t> degrees_;
  std::vector<uint32_t> adjacency_;
};

/// Disk-resident graph served through a read-only memory map. Each node is
/// one contiguous record, so visiting a node touches a single region:
///
///   [vector f32 x h][degree u32][neighbors u32 x R, zero padded]
///
/// File header (64 bytes, little-endian): "VMNA", u32 version, u64 N,
/// u32 h, u32 R, u32 entry_point, u32 L_build, f64 alpha, u64 seed,
/// u64 xxh64(records), u64 reserved.
class MappedVamanaGraph {
 public:
  /// Validates the header and body checksum with buffered reads, then maps
  /// the file. Throws CorruptIndex or VersionError.
  explicit MappedVamanaGraph(const std::filesystem::path& path);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  uint32_t max_degree() const { return R_; }
  uint32_t entry_point() const { return entry_point_; }
  float alpha() const { return alpha_; }
  uint64_t seed() const { return seed_; }
  uint32_t L_build() const { return L_build_; }
  std::size_t file_size() const { return file_.size(); }

  VectorView vector(uint32_t node) const {
    return {reinterpret_cast<const float*>(record(node)), dim_};
  }
  std::span<const uint32_t> neighbors(uint32_t node) const;

  std::vector<Hit> search(VectorView query, const BeamSearchParams& params,
                          BeamSearchStats* stats = nullptr) const;

 private:
  const std::byte* record(uint32_t node) const {
    return file_.data() + kHeaderSize + std::size_t{node} * record_size_;
  }

  static constexpr std::size_t kHeaderSize = 64;

  MappedFile file_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  uint32_t R_ = 0;
  uint32_t entry_point_ = 0;
  float alpha_ = 1.0f;
  uint64_t seed_ = 0;
  uint32_t L_build_ = 0;
  std::size_t record_size_ = 0;
};

/// Index of the point with the smallest squared distance to the mean, which
/// is the medoid under squared Euclidean distance.
uint32_t squared_medoid(const Matrix& vectors);

}  // namespace vecserve
