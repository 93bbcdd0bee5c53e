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
#include "vecserve/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>
#include <unordered_set>

namespace vecserve {

std::vector<Hit> brute_force_topk(const float* rows, std::size_t n, std::size_t dim, VectorView query,
                                  std::size_t k) {
  TopK top(k);
  for (std::size_t i = 0; i < n; ++i) {
    top.push({static_cast<ChunkId>(i), dot(query.data(), rows + i * dim, dim)});
  }
  return std::move(top).take_sorted();
}

double recall_at_k(std::span<const Hit> found, std::span<const Hit> truth, std::size_t k) {
  const std::size_t denom = std::min(k, truth.size());
  if (denom == 0) return 1.0;
  std::unordered_set<ChunkId> want;
  for (std::size_t i = 0; i < denom; ++i) want.insert(truth[i].id);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, found.size()); ++i) hit += want.count(found[i].id);
  return static_cast<double>(hit) / static_cast<double>(denom);
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

BenchRow run_bench(std::string backend, std::string params, const SearchFn& search, const Matrix& queries,
                   const std::vector<std::vector<Hit>>& truth, std::size_t k, uint32_t threads) {
  const std::size_t n = queries.rows();
  std::vector<double> latency(n, 0.0);
  std::vector<double> recall(n, 0.0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      auto t0 = std::chrono::steady_clock::now();
      auto hits = search(queries.row(i));
      latency[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      recall[i] = recall_at_k(hits, truth[i], k);
    }
  };
  auto start = std::chrono::steady_clock::now();
  std::vector<std::thread> pool;
  for (uint32_t t = 1; t < std::max<uint32_t>(threads, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  BenchRow row;
  row.backend = std::move(backend);
  row.params = std::move(params);
  row.queries = n;
  double sum = 0.0;
  for (double r : recall) sum += r;
  row.recall = n ? sum / static_cast<double>(n) : 0.0;
  row.p50_ms = percentile(latency, 50);
  row.p95_ms = percentile(latency, 95);
  row.p99_ms = percentile(latency, 99);
  row.qps = wall > 0 ? static_cast<double>(n) / wall : 0.0;
  return row;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "backend,params,recall_at_k,p50_ms,p95_ms,p99_ms,qps,queries\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f,%.2f,%zu", r.recall, r.p50_ms, r.p95_ms, r.p99_ms,
                  r.qps, r.queries);
    out << r.backend << ",\"" << r.params << "\"," << buf << "\n";
  }
}

void write_bench_table(std::ostream& out, std::span<const BenchRow> rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %-22s %8s %9s %9s %9s %10s\n", "backend", "params", "recall", "p50_ms",
                "p95_ms", "p99_ms", "qps");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %-22s %8.4f %9.3f %9.3f %9.3f %10.1f\n", r.backend.c_str(),
                  r.params.c_str(), r.recall, r.p50_ms, r.p95_ms, r.p99_ms, r.qps);
    out << buf;
  }
}

}  // namespace vecserve
