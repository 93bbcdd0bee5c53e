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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vecserve/io.h"

namespace vecserve {

using VectorView = std::span<const float>;

/// Inner product without dimension checks. Every score in the engine goes
/// through this kernel so that independent paths (in-memory graph, mapped
/// graph, brute force) produce bit-identical floats.
inline float dot(const float* a, const float* b, std::size_t dim) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (; i < dim; ++i) acc[i & 7] += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

inline float l2_sq(const float* a, const float* b, std::size_t dim) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) {
      float d = a[i + j] - b[i + j];
      acc[j] += d * d;
    }
  }
  for (; i < dim; ++i) {
    float d = a[i] - b[i];
    acc[i & 7] += d * d;
  }
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

/// Cosine similarity of two unit-norm embeddings, i.e. their inner product.
/// Throws DimensionError when the lengths differ.
float similarity(VectorView a, VectorView b);

float l2_norm(VectorView v);

/// Scales `v` to unit length in place. Returns false (leaving `v`
/// untouched) when the norm is zero or not finite.
bool normalize(std::span<float> v);

/// Dense row-major float matrix; one embedding per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim) {}
  Matrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return rows_ == 0; }

  VectorView row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  const float* data() const { return data_.data(); }
  float* data() { return data_.data(); }
  const std::vector<float>& values() const { return data_; }

  void append(VectorView v);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// On-disk vector file: a 24-byte header followed by row-major f32 rows.
///
///   offset 0   char[4]  magic "VECF"
///   offset 4   u32      version (1)
///   offset 8   u64      row count
///   offset 16  u32      dim
///   offset 20  u32      reserved (0)
///   offset 24  f32      rows...
struct VectorFileHeader {
  static constexpr char kMagic[4] = {'V', 'E', 'C', 'F'};
  static constexpr uint32_t kVersion = 1;
  static constexpr std::size_t kSize = 24;

  uint64_t count = 0;
  uint32_t dim = 0;
};

void write_vector_file(const std::filesystem::path& path, const Matrix& vectors);

/// Memory-mapped, read-only view of a vector file.
class VectorFile {
 public:
  explicit VectorFile(const std::filesystem::path& path);

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  VectorView row(std::size_t i) const { return {base_ + i * dim_, dim_}; }
  const float* data() const { return base_; }

  // Copies every row into memory.
  Matrix load() const;

 private:
  MappedFile file_;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  const float* base_ = nullptr;
};

VectorFileHeader read_vector_file_header(const std::filesystem::path& path);

}  // namespace vecserve
