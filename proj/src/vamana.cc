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
#include "vecserve/vamana.h"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace vecserve {
namespace {

constexpr char kMagic[4] = {'V', 'M', 'N', 'A'};
constexpr uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 64;
constexpr std::size_t kChecksumOffset = 48;
// Nodes inserted against the same graph snapshot.
constexpr std::size_t kBuildBatch = 64;

/// Query-local open-addressing set of node ids.
class VisitedSet {
 public:
  explicit VisitedSet(std::size_t expected) {
    std::size_t cap = 64;
    while (cap < expected * 2) cap <<= 1;
    slots_.assign(cap, kEmpty);
  }

  // Returns true if `id` was not yet present.
  bool insert(uint32_t id) {
    if ((size_ + 1) * 2 > slots_.size()) grow();
    return insert_slot(id);
  }

 private:
  static constexpr uint32_t kEmpty = std::numeric_limits<uint32_t>::max();

  static std::size_t hash(uint32_t id) { return static_cast<std::size_t>(id) * 0x9E3779B97F4A7C15ULL; }

  bool insert_slot(uint32_t id) {
    const std::size_t mask = slots_.size() - 1;
    std::size_t i = (hash(id) >> 20) & mask;
    while (slots_[i] != kEmpty) {
      if (slots_[i] == id) return false;
      i = (i + 1) & mask;
    }
    slots_[i] = id;
    ++size_;
    return true;
  }

  void grow() {
    std::vector<uint32_t> old = std::move(slots_);
    slots_.assign(old.size() * 2, kEmpty);
    size_ = 0;
    for (uint32_t id : old) {
      if (id != kEmpty) insert_slot(id);
    }
  }

  std::vector<uint32_t> slots_;
  std::size_t size_ = 0;
};

struct Candidate {
  uint32_t id;
  float score;
  bool expanded;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  return ranks_before({a.id, a.score}, {b.id, b.score});
}

/// Greedy beam search shared by the in-memory and mapped graphs. When
/// `expanded_out` is set, every expanded node id is appended to it.
template <typename Graph>
std::vector<Hit> beam_search_impl(const Graph& g, VectorView query, uint32_t L, uint32_t W,
                                  uint32_t k, BeamSearchStats* stats,
                                  std::vector<uint32_t>* expanded_out) {
  if (query.size() != g.dim()) {
    throw Error(ErrorCode::kDimension, "query dim " + std::to_string(query.size()) +
                                           " does not match index dim " + std::to_string(g.dim()));
  }
  BeamSearchStats local;
  std::vector<Candidate> list;
  list.reserve(L + 1);
  VisitedSet visited(std::size_t{L} * 4);

  const std::size_t dim = g.dim();
  const uint32_t entry = g.entry_point();
  visited.insert(entry);
  list.push_back({entry, dot(query.data(), g.vector(entry).data(), dim), false});
  ++local.scored;

  std::vector<uint32_t> beam;
  beam.reserve(W);
  while (true) {
    beam.clear();
    for (auto& c : list) {
      if (!c.expanded) {
        c.expanded = true;
        beam.push_back(c.id);
        if (beam.size() == W) break;
      }
    }
    if (beam.empty()) break;
    ++local.rounds;
    for (uint32_t node : beam) {
      ++local.expanded;
      if (expanded_out != nullptr) expanded_out->push_back(node);
      for (uint32_t nb : g.neighbors(node)) {
        if (!visited.insert(nb)) continue;
        Candidate cand{nb, dot(query.data(), g.vector(nb).data(), dim), false};
        ++local.scored;
        if (list.size() >= L && !candidate_before(cand, list.back())) continue;
        auto pos = std::upper_bound(list.begin(), list.end(), cand, candidate_before);
        list.insert(pos, cand);
        if (list.size() > L) list.pop_back();
      }
    }
  }

  if (stats != nullptr) *stats = local;
  std::vector<Hit> out;
  const std::size_t n = std::min<std::size_t>(k, list.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({list[i].id, list[i].score});
  return out;
}

template <typename Fn>
void parallel_for(std::size_t n, uint32_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t physical_memory_bytes() {
  long pages = ::sysconf(_SC_PHYS_PAGES);
  long page_size = ::sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page_size <= 0) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(pages) * static_cast<std::size_t>(page_size);
}

struct GraphHeader {
  uint64_t count;
  uint32_t dim;
  uint32_t R;
  uint32_t entry_point;
  uint32_t L_build;
  double alpha;
  uint64_t seed;
  uint64_t checksum;
};

GraphHeader parse_graph_header(std::span<const std::byte> bytes, const std::filesystem::path& path) {
  if (bytes.size() < kHeaderSize) {
    throw Error(ErrorCode::kCorruptIndex, "graph index too small: " + path.string());
  }
  ByteReader in(bytes);
  if (std::memcmp(in.take(4).data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kCorruptIndex, "not a graph index: " + path.string());
  }
  auto version = in.read<uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::kVersion, "unsupported graph index version " + std::to_string(version) +
                                         " in " + path.string());
  }
  GraphHeader h{};
  h.count = in.read<uint64_t>();
  h.dim = in.read<uint32_t>();
  h.R = in.read<uint32_t>();
  h.entry_point = in.read<uint32_t>();
  h.L_build = in.read<uint32_t>();
  h.alpha = in.read<double>();
  h.seed = in.read<uint64_t>();
  h.checksum = in.read<uint64_t>();
  if (h.count == 0 || h.dim == 0 || h.R == 0 || h.entry_point >= h.count) {
    throw Error(ErrorCode::kCorruptIndex, "invalid graph header in " + path.string());
  }
  return h;
}

std::size_t record_size(const GraphHeader& h) {
  return std::size_t{h.dim} * sizeof(float) + sizeof(uint32_t) + std::size_t{h.R} * sizeof(uint32_t);
}

}  // namespace

void VamanaParams::validate(std::size_t n) const {
  if (n < 2) throw Error(ErrorCode::kConfig, "graph build needs N >= 2, got " + std::to_string(n));
  if (R < 2) throw Error(ErrorCode::kConfig, "R must be >= 2");
  if (L_build < R) throw Error(ErrorCode::kConfig, "L_build must be >= R");
  if (!(alpha >= 1.0f)) throw Error(ErrorCode::kConfig, "alpha must be >= 1.0");
  if (n > std::numeric_limits<uint32_t>::max() - 1) {
    throw Error(ErrorCode::kConfig, "graph build supports at most 2^32-2 nodes");
  }
}

void BeamSearchParams::validate() const {
  if (k < 1) throw Error(ErrorCode::kConfig, "k must be >= 1");
  if (W < 1) throw Error(ErrorCode::kConfig, "W must be >= 1");
  if (L < k) throw Error(ErrorCode::kConfig, "L must be >= k");
  if (W > L) throw Error(ErrorCode::kConfig, "W must be <= L");
}

uint32_t squared_medoid(const Matrix& vectors) {
  const std::size_t dim = vectors.dim();
  std::vector<double> sum(dim, 0.0);
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    auto row = vectors.row(i);
    for (std::size_t d = 0; d < dim; ++d) sum[d] += row[d];
  }
  std::vector<float> mean(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    mean[d] = static_cast<float>(sum[d] / static_cast<double>(vectors.rows()));
  }
  uint32_t best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    float d = l2_sq(vectors.row(i).data(), mean.data(), dim);
    if (d < best_d) {
      best_d = d;
      best = static_cast<uint32_t>(i);
    }
  }
  return best;
}

class VamanaBuilder {
 public:
  VamanaBuilder(VamanaGraph& g, const VamanaParams& params) : g_(g), params_(params) {}

  void run() {
    std::mt19937_64 rng(params_.seed);
    random_init(rng);
    g_.entry_point_ = squared_medoid(g_.vectors_);

    std::vector<uint32_t> order(g_.count_);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }

    for (float pass_alpha : {1.0f, params_.alpha}) {
      for (std::size_t start = 0; start < order.size(); start += kBuildBatch) {
        const std::size_t end = std::min(order.size(), start + kBuildBatch);
        std::vector<std::vector<uint32_t>> updated(end - start);
        parallel_for(end - start, params_.threads, [&](std::size_t b) {
          updated[b] = candidate_neighbors(order[start + b], pass_alpha);
        });
        for (std::size_t b = 0; b < updated.size(); ++b) {
          const uint32_t node = order[start + b];
          set_neighbors(node, updated[b]);
          for (uint32_t nb : updated[b]) add_reverse_edge(nb, node, pass_alpha);
        }
      }
    }
  }

 private:
  void random_init(std::mt19937_64& rng) {
    const std::size_t n = g_.count_;
    const uint32_t degree = static_cast<uint32_t>(std::min<std::size_t>(g_.R_, n - 1));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<uint32_t> picks;
      if (degree == n - 1) {
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) picks.push_back(static_cast<uint32_t>(j));
        }
      } else {
        while (picks.size() < degree) {
          auto j = static_cast<uint32_t>(rng() % n);
          if (j == i || std::find(picks.begin(), picks.end(), j) != picks.end()) continue;
          picks.push_back(j);
        }
      }
      set_neighbors(static_cast<uint32_t>(i), picks);
    }
  }

  std::vector<uint32_t> candidate_neighbors(uint32_t node, float alpha) const {
    std::vector<uint32_t> visited;
    beam_search_impl(g_, g_.vector(node), g_.L_build_, 1, 1, nullptr, &visited);
    for (uint32_t nb : g_.neighbors(node)) visited.push_back(nb);
    std::sort(visited.begin(), visited.end());
    visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
    std::erase(visited, node);
    return robust_prune(node, visited, alpha);
  }

  // Alpha-pruned neighbour selection: repeatedly keep the closest remaining
  // candidate c and drop every candidate x with alpha * d(c, x) <= d(node, x).
  std::vector<uint32_t> robust_prune(uint32_t node, const std::vector<uint32_t>& candidates,
                                     float alpha) const {
    const std::size_t dim = g_.dim_;
    struct Scored {
      uint32_t id;
      float dist;
    };
    std::vector<Scored> pool;
    pool.reserve(candidates.size());
    for (uint32_t c : candidates) {
      pool.push_back({c, l2_sq(g_.vector(node).data(), g_.vector(c).data(), dim)});
    }
    std::sort(pool.begin(), pool.end(), [](const Scored& a, const Scored& b) {
      return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
    });
    std::vector<bool> pruned(pool.size(), false);
    std::vector<uint32_t> kept;
    kept.reserve(g_.R_);
    for (std::size_t i = 0; i < pool.size() && kept.size() < g_.R_; ++i) {
      if (pruned[i]) continue;
      kept.push_back(pool[i].id);
      const float* anchor = g_.vector(pool[i].id).data();
      for (std::size_t j = i + 1; j < pool.size(); ++j) {
        if (pruned[j]) continue;
        if (alpha * l2_sq(anchor, g_.vector(pool[j].id).data(), dim) <= pool[j].dist) pruned[j] = true;
      }
    }
    return kept;
  }

  void add_reverse_edge(uint32_t from, uint32_t to, float alpha) {
    auto current = g_.neighbors(from);
    if (std::find(current.begin(), current.end(), to) != current.end()) return;
    if (current.size() < g_.R_) {
      g_.adjacency_[std::size_t{from} * g_.R_ + current.size()] = to;
      ++g_.degrees_[from];
      return;
    }
    std::vector<uint32_t> candidates(current.begin(), current.end());
    candidates.push_back(to);
    set_neighbors(from, robust_prune(from, candidates, alpha));
  }

  void set_neighbors(uint32_t node, const std::vector<uint32_t>& nbs) {
    uint32_t* slot = g_.adjacency_.data() + std::size_t{node} * g_.R_;
    std::fill(slot, slot + g_.R_, 0u);
    std::copy(nbs.begin(), nbs.end(), slot);
    g_.degrees_[node] = static_cast<uint32_t>(nbs.size());
  }

  VamanaGraph& g_;
  const VamanaParams& params_;
};

VamanaGraph VamanaGraph::build(const Matrix& vectors, const VamanaParams& params) {
  params.validate(vectors.rows());
  const std::size_t n = vectors.rows();
  const std::size_t needed = n * (vectors.dim() * sizeof(float) + (std::size_t{params.R} + 1) * sizeof(uint32_t)) +
                             std::size_t{std::max(1u, params.threads)} * params.L_build * 64 * sizeof(uint32_t);
  const std::size_t budget =
      params.memory_budget_bytes != 0 ? params.memory_budget_bytes : physical_memory_bytes() / 10 * 9;
  if (needed > budget) {
    throw Error(ErrorCode::kBuildResource, "graph build needs ~" + std::to_string(needed) +
                                               " bytes, budget is " + std::to_string(budget));
  }

  VamanaGraph g;
  g.count_ = n;
  g.dim_ = vectors.dim();
  g.R_ = params.R;
  g.alpha_ = params.alpha;
  g.seed_ = params.seed;
  g.L_build_ = params.L_build;
  g.vectors_ = vectors;
  g.degrees_.assign(n, 0);
  g.adjacency_.assign(n * params.R, 0);
  VamanaBuilder(g, params).run();
  return g;
}

std::vector<Hit> VamanaGraph::search(VectorView query, const BeamSearchParams& params,
                                     BeamSearchStats* stats) const {
  params.validate();
  return beam_search_impl(*this, query, params.L, params.W, params.k, stats, nullptr);
}

void VamanaGraph::save(const std::filesystem::path& path) const {
  BinaryWriter out(path);
  out.write_bytes(kMagic, 4);
  out.write<uint32_t>(kVersion);
  out.write<uint64_t>(count_);
  out.write<uint32_t>(static_cast<uint32_t>(dim_));
  out.write<uint32_t>(R_);
  out.write<uint32_t>(entry_point_);
  out.write<uint32_t>(L_build_);
  out.write<double>(alpha_);
  out.write<uint64_t>(seed_);
  out.write<uint64_t>(0);  // checksum, patched below
  out.write<uint64_t>(0);
  out.start_checksum();
  for (std::size_t i = 0; i < count_; ++i) {
    out.write_span<float>(vectors_.row(i));
    out.write<uint32_t>(degrees_[i]);
    out.write_span<uint32_t>({adjacency_.data() + i * R_, R_});
  }
  uint64_t checksum = out.checksum();
  out.patch(kChecksumOffset, &checksum, sizeof(checksum));
  out.finish();
}

VamanaGraph VamanaGraph::load(const std::filesystem::path& path) {
  MappedFile file(path);
  GraphHeader h = parse_graph_header(file.bytes(), path);
  const std::size_t rec = record_size(h);
  if (file.size() != kHeaderSize + h.count * rec) {
    throw Error(ErrorCode::kCorruptIndex, "graph index size does not match header: " + path.string());
  }
  auto body = file.bytes().subspan(kHeaderSize);
  if (xxh64(body) != h.checksum) {
    throw Error(ErrorCode::kCorruptIndex, "graph index checksum mismatch: " + path.string());
  }
  VamanaGraph g;
  g.count_ = h.count;
  g.dim_ = h.dim;
  g.R_ = h.R;
  g.entry_point_ = h.entry_point;
  g.alpha_ = static_cast<float>(h.alpha);
  g.seed_ = h.seed;
  g.L_build_ = h.L_build;
  g.vectors_ = Matrix(h.count, h.dim);
  g.degrees_.resize(h.count);
  g.adjacency_.resize(h.count * h.R);
  for (std::size_t i = 0; i < h.count; ++i) {
    const std::byte* r = body.data() + i * rec;
    std::memcpy(g.vectors_.row(i).data(), r, h.dim * sizeof(float));
    std::memcpy(&g.degrees_[i], r + h.dim * sizeof(float), sizeof(uint32_t));
    std::memcpy(&g.adjacency_[i * h.R], r + h.dim * sizeof(float) + sizeof(uint32_t),
                h.R * sizeof(uint32_t));
    if (g.degrees_[i] > h.R) {
      throw Error(ErrorCode::kCorruptIndex, "node " + std::to_string(i) + " exceeds degree bound");
    }
  }
  return g;
}

MappedVamanaGraph::MappedVamanaGraph(const std::filesystem::path& path) {
  GraphHeader h{};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open graph index " + path.string());
    std::array<std::byte, kHeaderSize> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    h = parse_graph_header({header.data(), static_cast<std::size_t>(in.gcount())}, path);

    // Stream the body through the hash so validation does not fault the
    // whole mapping into resident memory.
    Xxh64 hash;
    std::vector<char> buf(1 << 20);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      hash.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (hash.digest() != h.checksum) {
      throw Error(ErrorCode::kCorruptIndex, "graph index checksum mismatch: " + path.string());
    }
  }
  file_ = MappedFile(path);
  count_ = h.count;
  dim_ = h.dim;
  R_ = h.R;
  entry_point_ = h.entry_point;
  alpha_ = static_cast<float>(h.alpha);
  seed_ = h.seed;
  L_build_ = h.L_build;
  record_size_ = record_size(h);
  if (file_.size() != kHeaderSize + count_ * record_size_) {
    throw Error(ErrorCode::kCorruptIndex, "graph index size does not match header: " + path.string());
  }
}

std::span<const uint32_t> MappedVamanaGraph::neighbors(uint32_t node) const {
  const std::byte* r = record(node) + dim_ * sizeof(float);
  uint32_t degree;
  std::memcpy(&degree, r, sizeof(degree));
  if (degree > R_) {
    throw Error(ErrorCode::kCorruptIndex, "node " + std::to_string(node) + " exceeds degree bound");
  }
  auto nbs = std::span<const uint32_t>(reinterpret_cast<const uint32_t*>(r + sizeof(uint32_t)), degree);
  for (uint32_t nb : nbs) {
    if (nb >= count_) throw Error(ErrorCode::kCorruptIndex, "neighbor id out of range");
  }
  return nbs;
}

std::vector<Hit> MappedVamanaGraph::search(VectorView query, const BeamSearchParams& params,
                                           BeamSearchStats* stats) const {
  params.validate();
  return beam_search_impl(*this, query, params.L, params.W, params.k, stats, nullptr);
}

}  // namespace vecserve
