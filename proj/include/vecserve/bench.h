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

#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vecserve/hits.h"
#include "vecserve/vectors.h"

namespace vecserve {

/// Exhaustive top-k by inner product over `n` rows of `dim` floats.
std::vector<Hit> brute_force_topk(const float* rows, std::size_t n, std::size_t dim, VectorView query,
                                  std::size_t k);
inline std::vector<Hit> brute_force_topk(const Matrix& m, VectorView query, std::size_t k) {
  return brute_force_topk(m.data(), m.rows(), m.dim(), query, k);
}

/// |ids(found[:k]) & ids(truth[:k])| / min(k, |truth|).
double recall_at_k(std::span<const Hit> found, std::span<const Hit> truth, std::size_t k);

struct BenchRow {
  std::string backend;
  std::string params;  // "L=64 W=4" style
  double recall = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double qps = 0.0;
  std::size_t queries = 0;
};

using SearchFn = std::function<std::vector<Hit>(VectorView query)>;

/// Runs every query through `search` on `threads` workers and scores it
/// against `truth`. QPS is queries over wall time.
BenchRow run_bench(std::string backend, std::string params, const SearchFn& search, const Matrix& queries,
                   const std::vector<std::vector<Hit>>& truth, std::size_t k, uint32_t threads);

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);
void write_bench_table(std::ostream& out, std::span<const BenchRow> rows);

/// Nearest-rank percentile of unsorted samples; p in (0, 100].
double percentile(std::vector<double> samples, double p);

}  // namespace vecserve
