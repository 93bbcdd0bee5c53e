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
#include "vecserve/vectors.h"

#include <array>
#include <cmath>
#include <fstream>

namespace vecserve {

float similarity(VectorView a, VectorView b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimension, "dimension mismatch: " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
  }
  return dot(a.data(), b.data(), a.size());
}

float l2_norm(VectorView v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return static_cast<float>(std::sqrt(sum));
}

bool normalize(std::span<float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  if (!(sum > 0.0) || !std::isfinite(sum)) return false;
  double inv = 1.0 / std::sqrt(sum);
  for (float& x : v) x = static_cast<float>(x * inv);
  return true;
}

Matrix::Matrix(std::size_t rows, std::size_t dim, std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows * dim) {
    throw Error(ErrorCode::kDimension, "matrix data size does not match rows*dim");
  }
}

void Matrix::append(VectorView v) {
  if (rows_ == 0 && dim_ == 0) dim_ = v.size();
  if (v.size() != dim_) {
    throw Error(ErrorCode::kDimension, "appending row of dim " + std::to_string(v.size()) +
                                           " to matrix of dim " + std::to_string(dim_));
  }
  data_.insert(data_.end(), v.begin(), v.end());
  ++rows_;
}

void write_vector_file(const std::filesystem::path& path, const Matrix& vectors) {
  BinaryWriter out(path);
  out.write_bytes(VectorFileHeader::kMagic, 4);
  out.write<uint32_t>(VectorFileHeader::kVersion);
  out.write<uint64_t>(vectors.rows());
  out.write<uint32_t>(static_cast<uint32_t>(vectors.dim()));
  out.write<uint32_t>(0);
  out.write_span<float>(vectors.values());
  out.finish();
}

namespace {

VectorFileHeader parse_header(std::span<const std::byte> bytes, const std::filesystem::path& path) {
  ByteReader reader(bytes);
  auto magic = reader.take(4);
  if (std::memcmp(magic.data(), VectorFileHeader::kMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptIndex, "not a vector file: " + path.string());
  }
  auto version = reader.read<uint32_t>();
  if (version != VectorFileHeader::kVersion) {
    throw Error(ErrorCode::kVersion, "unsupported vector file version " +
                                         std::to_string(version) + " in " + path.string());
  }
  VectorFileHeader header;
  header.count = reader.read<uint64_t>();
  header.dim = reader.read<uint32_t>();
  reader.read<uint32_t>();
  return header;
}

}  // namespace

VectorFileHeader read_vector_file_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vector file " + path.string());
  std::array<std::byte, VectorFileHeader::kSize> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw Error(ErrorCode::kCorruptIndex, "truncated vector file header: " + path.string());
  }
  return parse_header(buf, path);
}

VectorFile::VectorFile(const std::filesystem::path& path) : file_(path) {
  auto header = parse_header(file_.bytes(), path);
  count_ = header.count;
  dim_ = header.dim;
  std::size_t expected = VectorFileHeader::kSize + count_ * dim_ * sizeof(float);
  if (file_.size() != expected) {
    throw Error(ErrorCode::kCorruptIndex,
                "vector file size " + std::to_string(file_.size()) + " does not match header (" +
                    std::to_string(expected) + "): " + path.string());
  }
  base_ = reinterpret_cast<const float*>(file_.data() + VectorFileHeader::kSize);
}

Matrix VectorFile::load() const {
  std::vector<float> data(base_, base_ + count_ * dim_);
  return Matrix(count_, dim_, std::move(data));
}

}  // namespace vecserve
