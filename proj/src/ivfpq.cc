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
#include "vecserve/ivfpq.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "vecserve/kmeans.h"

namespace vecserve {
namespace {

constexpr char kMagic[4] = {'I', 'V', 'P', 'Q'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kFlagResidual = 1u << 0;
constexpr uint32_t kFlagExactCodes = 1u << 1;
// magic, version, N, h, n_lists, m, flags, seed, inertia, distortion x2, checksum
constexpr std::size_t kHeaderSize = 72;
constexpr std::size_t kChecksumOffset = kHeaderSize - sizeof(uint64_t);

Matrix sample_rows(const Matrix& vectors, std::size_t cap, uint64_t seed) {
  if (vectors.rows() <= cap) return vectors;
  std::vector<std::size_t> idx(vectors.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  Matrix out(cap, vectors.dim());
  for (std::size_t i = 0; i < cap; ++i) {
    std::copy(vectors.row(idx[i]).begin(), vectors.row(idx[i]).end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

uint32_t default_n_lists(std::size_t n) {
  double target = 4.0 * std::sqrt(static_cast<double>(n));
  double exponent = std::clamp(std::round(std::log2(std::max(target, 1.0))), 4.0, 16.0);
  auto pow2 = static_cast<uint32_t>(1u << static_cast<int>(exponent));
  return static_cast<uint32_t>(std::min<std::size_t>(pow2, std::max<std::size_t>(n, 1)));
}

IvfPqIndex IvfPqIndex::train(const Matrix& vectors, const IvfPqParams& params) {
  const std::size_t n = vectors.rows();
  const std::size_t dim = vectors.dim();
  if (params.m == 0 || dim == 0 || dim % params.m != 0) {
    throw Error(ErrorCode::kConfig, "dimension " + std::to_string(dim) +
                                        " is not divisible by m=" + std::to_string(params.m));
  }
  const uint32_t n_lists = params.n_lists != 0 ? params.n_lists : default_n_lists(n);
  if (n < n_lists) {
    throw Error(ErrorCode::kConfig, "need N >= n_lists, got N=" + std::to_string(n) +
                                        " n_lists=" + std::to_string(n_lists));
  }

  IvfPqIndex index;
  index.dim_ = dim;
  index.m_ = params.m;
  index.exact_codes_ = params.exact_codes;
  index.seed_ = params.seed;

  std::size_t cap = params.max_train_points != 0
                        ? params.max_train_points
                        : std::max<std::size_t>(kCodebookSize, 40ull * n_lists);
  cap = std::max<std::size_t>(cap, n_lists);
  Matrix sample = sample_rows(vectors, cap, params.seed);
  if (!params.exact_codes && sample.rows() < kCodebookSize) {
    throw Error(ErrorCode::kConfig, "PQ training needs >= 256 points, got " +
                                        std::to_string(sample.rows()));
  }

  KMeansConfig coarse_cfg;
  coarse_cfg.k = n_lists;
  coarse_cfg.seed = params.seed;
  coarse_cfg.spherical = true;
  KMeansResult coarse = kmeans(sample, coarse_cfg);
  index.centroids_ = std::move(coarse.centroids);
  index.coarse_inertia_ = coarse.inertia;
  index.lists_.resize(n_lists);

  if (!params.exact_codes) {
    const std::size_t sub = dim / params.m;
    Matrix residuals(sample.rows(), dim);
    for (std::size_t i = 0; i < sample.rows(); ++i) {
      auto c = index.centroids_.row(coarse.assignment[i]);
      auto x = sample.row(i);
      auto r = residuals.row(i);
      for (std::size_t d = 0; d < dim; ++d) r[d] = x[d] - c[d];
    }
    index.codebooks_ = Matrix(static_cast<std::size_t>(kCodebookSize) * params.m, sub);
    std::vector<double> point_error(sample.rows(), 0.0);
    for (uint32_t s = 0; s < params.m; ++s) {
      Matrix subvectors(sample.rows(), sub);
      for (std::size_t i = 0; i < sample.rows(); ++i) {
        auto r = residuals.row(i).subspan(s * sub, sub);
        std::copy(r.begin(), r.end(), subvectors.row(i).begin());
      }
      KMeansConfig pq_cfg;
      pq_cfg.k = kCodebookSize;
      pq_cfg.seed = params.seed + 1 + s;
      KMeansResult book = kmeans(subvectors, pq_cfg);
      for (std::size_t j = 0; j < kCodebookSize; ++j) {
        std::copy(book.centroids.row(j).begin(), book.centroids.row(j).end(),
                  index.codebooks_.row(s * kCodebookSize + j).begin());
      }
      for (std::size_t i = 0; i < sample.rows(); ++i) {
        point_error[i] += l2_sq(subvectors.row(i).data(),
                                book.centroids.row(book.assignment[i]).data(), sub);
      }
    }
    double sum = 0.0;
    for (double e : point_error) {
      sum += e;
      index.distortion_max_ = std::max(index.distortion_max_, e);
    }
    index.distortion_mean_ = sum / static_cast<double>(sample.rows());
  }
  return index;
}

void IvfPqIndex::encode_residual(VectorView residual, uint8_t* code) const {
  const std::size_t sub = sub_dim();
  for (uint32_t s = 0; s < m_; ++s) {
    const float* r = residual.data() + s * sub;
    float best = std::numeric_limits<float>::infinity();
    uint32_t best_j = 0;
    for (uint32_t j = 0; j < kCodebookSize; ++j) {
      float d = l2_sq(r, codebooks_.row(s * kCodebookSize + j).data(), sub);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    code[s] = static_cast<uint8_t>(best_j);
  }
}

void IvfPqIndex::add(ChunkId id, VectorView vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::kDimension, "vector dim " + std::to_string(vector.size()) +
                                           " does not match index dim " + std::to_string(dim_));
  }
  if (id < present_.size() && present_[id]) {
    throw Error(ErrorCode::kDuplicateId, "chunk id " + std::to_string(id) + " already indexed");
  }
  if (id >= present_.size()) present_.resize(id + 1, false);

  uint32_t list = nearest_centroid(centroids_, vector);
  InvertedList& inv = lists_[list];
  inv.ids.push_back(id);
  std::size_t offset = inv.codes.size();
  inv.codes.resize(offset + code_size());
  if (exact_codes_) {
    std::memcpy(inv.codes.data() + offset, vector.data(), code_size());
  } else {
    std::vector<float> residual(dim_);
    auto c = centroids_.row(list);
    for (std::size_t d = 0; d < dim_; ++d) residual[d] = vector[d] - c[d];
    encode_residual(residual, inv.codes.data() + offset);
  }
  present_[id] = true;
  ++total_;
}

void IvfPqIndex::add_all(const Matrix& vectors) {
  for (std::size_t i = 0; i < vectors.rows(); ++i) add(i, vectors.row(i));
}

float IvfPqIndex::scan_code(const float* tables, float base, const uint8_t* code,
                            VectorView query) const {
  if (exact_codes_) {
    return dot(query.data(), reinterpret_cast<const float*>(code), dim_);
  }
  float score = base;
  for (uint32_t s = 0; s < m_; ++s) score += tables[s * kCodebookSize + code[s]];
  return score;
}

std::vector<Hit> IvfPqIndex::search(VectorView query, std::size_t k, uint32_t n_probe) const {
  if (query.size() != dim_) {
    throw Error(ErrorCode::kDimension, "query dim " + std::to_string(query.size()) +
                                           " does not match index dim " + std::to_string(dim_));
  }
  if (k == 0) throw Error(ErrorCode::kConfig, "k must be >= 1");
  if (n_probe < 1 || n_probe > n_lists()) {
    throw Error(ErrorCode::kConfig, "n_probe must be in [1, " + std::to_string(n_lists()) +
                                        "], got " + std::to_string(n_probe));
  }

  std::vector<Hit> coarse(n_lists());
  for (uint32_t c = 0; c < n_lists(); ++c) {
    coarse[c] = {c, dot(query.data(), centroids_.row(c).data(), dim_)};
  }
  std::partial_sort(coarse.begin(), coarse.begin() + n_probe, coarse.end(), ranks_before);

  std::vector<float> tables;
  if (!exact_codes_) {
    const std::size_t sub = sub_dim();
    tables.resize(static_cast<std::size_t>(m_) * kCodebookSize);
    for (uint32_t s = 0; s < m_; ++s) {
      const float* q = query.data() + s * sub;
      for (uint32_t j = 0; j < kCodebookSize; ++j) {
        tables[s * kCodebookSize + j] = dot(q, codebooks_.row(s * kCodebookSize + j).data(), sub);
      }
    }
  }

  TopK top(k);
  const std::size_t cs = code_size();
  for (uint32_t p = 0; p < n_probe; ++p) {
    const InvertedList& inv = lists_[coarse[p].id];
    const float base = coarse[p].score;
    for (std::size_t e = 0; e < inv.ids.size(); ++e) {
      top.push({inv.ids[e], scan_code(tables.data(), base, inv.codes.data() + e * cs, query)});
    }
  }
  return std::move(top).take_sorted();
}

void IvfPqIndex::locate(ChunkId id, uint32_t& list, std::size_t& pos) const {
  for (uint32_t l = 0; l < lists_.size(); ++l) {
    const auto& ids = lists_[l].ids;
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it != ids.end()) {
      list = l;
      pos = static_cast<std::size_t>(it - ids.begin());
      return;
    }
  }
  throw Error(ErrorCode::kNotFound, "chunk id " + std::to_string(id) + " is not indexed");
}

std::vector<float> IvfPqIndex::reconstruct(ChunkId id) const {
  uint32_t list;
  std::size_t pos;
  locate(id, list, pos);
  const uint8_t* code = lists_[list].codes.data() + pos * code_size();
  std::vector<float> out(dim_);
  if (exact_codes_) {
    std::memcpy(out.data(), code, code_size());
    return out;
  }
  auto c = centroids_.row(list);
  const std::size_t sub = sub_dim();
  for (uint32_t s = 0; s < m_; ++s) {
    auto word = codebooks_.row(s * kCodebookSize + code[s]);
    for (std::size_t d = 0; d < sub; ++d) out[s * sub + d] = c[s * sub + d] + word[d];
  }
  return out;
}

float IvfPqIndex::adc_score(VectorView query, ChunkId id) const {
  uint32_t list;
  std::size_t pos;
  locate(id, list, pos);
  std::vector<float> tables(static_cast<std::size_t>(m_) * kCodebookSize);
  if (!exact_codes_) {
    const std::size_t sub = sub_dim();
    for (uint32_t s = 0; s < m_; ++s) {
      for (uint32_t j = 0; j < kCodebookSize; ++j) {
        tables[s * kCodebookSize + j] =
            dot(query.data() + s * sub, codebooks_.row(s * kCodebookSize + j).data(), sub);
      }
    }
  }
  float base = dot(query.data(), centroids_.row(list).data(), dim_);
  return scan_code(tables.data(), base, lists_[list].codes.data() + pos * code_size(), query);
}

// Layout (little-endian):
//   header (72 bytes): "IVPQ" u32 version, u64 N, u32 h, u32 n_lists, u32 m,
//     u32 flags, u64 seed, f64 coarse_inertia, f64 distortion_mean,
//     f64 distortion_max, u64 xxh64(body)
//   body: centroids f32[n_lists*h], codebooks f32[m*256*sub_dim] (absent
//     with exact codes), then per list: u64 length, u64 ids[length],
//     codes[length * code_size]
void IvfPqIndex::save(const std::filesystem::path& path) const {
  BinaryWriter out(path);
  out.write_bytes(kMagic, 4);
  out.write<uint32_t>(kVersion);
  out.write<uint64_t>(total_);
  out.write<uint32_t>(static_cast<uint32_t>(dim_));
  out.write<uint32_t>(n_lists());
  out.write<uint32_t>(m_);
  out.write<uint32_t>(exact_codes_ ? kFlagExactCodes : kFlagResidual);
  out.write<uint64_t>(seed_);
  out.write<double>(coarse_inertia_);
  out.write<double>(distortion_mean_);
  out.write<double>(distortion_max_);
  out.write<uint64_t>(0);
  out.start_checksum();
  out.write_span<float>(centroids_.values());
  if (!exact_codes_) out.write_span<float>(codebooks_.values());
  for (const auto& inv : lists_) {
    out.write<uint64_t>(inv.ids.size());
    out.write_span<ChunkId>(inv.ids);
    out.write_span<uint8_t>(inv.codes);
  }
  uint64_t checksum = out.checksum();
  out.patch(kChecksumOffset, &checksum, sizeof(checksum));
  out.finish();
}

IvfPqIndex IvfPqIndex::load(const std::filesystem::path& path) {
  MappedFile file(path);
  ByteReader in(file.bytes());
  if (file.size() < kHeaderSize || std::memcmp(in.take(4).data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptIndex, "not an IVFPQ index: " + path.string());
  }
  auto version = in.read<uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::kVersion, "unsupported IVFPQ index version " + std::to_string(version));
  }
  IvfPqIndex index;
  const auto n = in.read<uint64_t>();
  index.dim_ = in.read<uint32_t>();
  const auto n_lists = in.read<uint32_t>();
  index.m_ = in.read<uint32_t>();
  const auto flags = in.read<uint32_t>();
  index.exact_codes_ = (flags & kFlagExactCodes) != 0;
  index.seed_ = in.read<uint64_t>();
  index.coarse_inertia_ = in.read<double>();
  index.distortion_mean_ = in.read<double>();
  index.distortion_max_ = in.read<double>();
  const auto checksum = in.read<uint64_t>();
  if (xxh64(file.bytes().subspan(kHeaderSize)) != checksum) {
    throw Error(ErrorCode::kCorruptIndex, "IVFPQ index checksum mismatch: " + path.string());
  }
  if (index.dim_ == 0 || index.m_ == 0 || index.dim_ % index.m_ != 0 || n_lists == 0) {
    throw Error(ErrorCode::kCorruptIndex, "invalid IVFPQ header in " + path.string());
  }

  auto read_floats = [&](std::size_t count) {
    auto bytes = in.take(count * sizeof(float));
    std::vector<float> v(count);
    std::memcpy(v.data(), bytes.data(), bytes.size());
    return v;
  };
  index.centroids_ = Matrix(n_lists, index.dim_, read_floats(std::size_t{n_lists} * index.dim_));
  if (!index.exact_codes_) {
    const std::size_t rows = std::size_t{kCodebookSize} * index.m_;
    index.codebooks_ = Matrix(rows, index.sub_dim(), read_floats(rows * index.sub_dim()));
  }
  index.lists_.resize(n_lists);
  for (auto& inv : index.lists_) {
    const auto len = in.read<uint64_t>();
    if (len > n) throw Error(ErrorCode::kCorruptIndex, "list length exceeds N in " + path.string());
    auto ids = in.take(len * sizeof(ChunkId));
    inv.ids.resize(len);
    std::memcpy(inv.ids.data(), ids.data(), ids.size());
    auto codes = in.take(len * index.code_size());
    inv.codes.assign(reinterpret_cast<const uint8_t*>(codes.data()),
                     reinterpret_cast<const uint8_t*>(codes.data()) + codes.size());
    for (ChunkId id : inv.ids) {
      if (id >= index.present_.size()) index.present_.resize(id + 1, false);
      if (index.present_[id]) {
        throw Error(ErrorCode::kCorruptIndex, "duplicate id in IVFPQ lists: " + std::to_string(id));
      }
      index.present_[id] = true;
    }
    index.total_ += len;
  }
  if (index.total_ != n) {
    throw Error(ErrorCode::kCorruptIndex, "IVFPQ list lengths do not sum to N in " + path.string());
  }
  return index;
}

}  // namespace vecserve
