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
#include "vecserve/kmeans.h"

#include <cmath>
#include <limits>
#include <random>

namespace vecserve {
namespace {

// Uniform double in [0, 1) from the top 53 bits; std distributions are not
// specified bit-for-bit across standard libraries.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Matrix kmeans_plus_plus(const Matrix& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = data.rows();
  const std::size_t dim = data.dim();
  Matrix centroids(k, dim);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);

  std::size_t pick = static_cast<std::size_t>(rng() % n);
  for (std::size_t c = 0; c < k; ++c) {
    chosen[pick] = true;
    std::copy(data.row(pick).begin(), data.row(pick).end(), centroids.row(c).begin());
    if (c + 1 == k) break;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = l2_sq(data.row(i).data(), centroids.row(c).data(), dim);
      if (d < min_dist[i]) min_dist[i] = d;
      if (!chosen[i]) total += min_dist[i];
    }
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      double running = 0.0;
      pick = n;
      std::size_t last_candidate = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || min_dist[i] <= 0.0) continue;
        last_candidate = i;
        running += min_dist[i];
        if (running > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_candidate;
    } else {
      // Every unchosen point duplicates a centroid; take the first one.
      pick = 0;
      while (pick < n && chosen[pick]) ++pick;
      if (pick == n) pick = static_cast<std::size_t>(rng() % n);
    }
  }
  return centroids;
}

double assign(const Matrix& data, const Matrix& centroids, std::vector<uint32_t>& assignment,
              std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    float best = std::numeric_limits<float>::infinity();
    uint32_t best_c = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      float d = l2_sq(data.row(i).data(), centroids.row(c).data(), data.dim());
      if (d < best) {
        best = d;
        best_c = static_cast<uint32_t>(c);
      }
    }
    assignment[i] = best_c;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

uint32_t repair_empty_clusters(const Matrix& data, Matrix& centroids,
                               std::vector<uint32_t>& assignment, std::vector<double>& dist) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (uint32_t a : assignment) ++counts[a];

  uint32_t repaired = 0;
  for (std::size_t empty = 0; empty < k; ++empty) {
    if (counts[empty] != 0) continue;
    std::size_t largest = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (counts[c] > counts[largest]) largest = c;
    }
    if (counts[largest] < 2) break;
    std::size_t farthest = data.rows();
    double far_dist = -1.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (assignment[i] == largest && dist[i] > far_dist) {
        far_dist = dist[i];
        farthest = i;
      }
    }
    std::copy(data.row(farthest).begin(), data.row(farthest).end(), centroids.row(empty).begin());
    assignment[farthest] = static_cast<uint32_t>(empty);
    dist[farthest] = 0.0;
    --counts[largest];
    counts[empty] = 1;
    ++repaired;
  }
  return repaired;
}

void update_centroids(const Matrix& data, const std::vector<uint32_t>& assignment,
                      Matrix& centroids, bool spherical) {
  const std::size_t dim = data.dim();
  std::vector<double> sums(centroids.rows() * dim, 0.0);
  std::vector<std::size_t> counts(centroids.rows(), 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto row = data.row(i);
    double* s = &sums[assignment[i] * dim];
    for (std::size_t d = 0; d < dim; ++d) s[d] += row[d];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    if (counts[c] == 0) continue;
    auto out = centroids.row(c);
    std::vector<float> mean(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      mean[d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
    }
    if (spherical && !normalize(mean)) continue;
    std::copy(mean.begin(), mean.end(), out.begin());
  }
}

}  // namespace

uint32_t nearest_centroid(const Matrix& centroids, VectorView v) {
  float best = std::numeric_limits<float>::infinity();
  uint32_t best_c = 0;
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    float d = l2_sq(v.data(), centroids.row(c).data(), v.size());
    if (d < best) {
      best = d;
      best_c = static_cast<uint32_t>(c);
    }
  }
  return best_c;
}

KMeansResult kmeans(const Matrix& data, const KMeansConfig& config) {
  if (config.k == 0) throw Error(ErrorCode::kConfig, "k-means needs k >= 1");
  if (data.rows() < config.k) {
    throw Error(ErrorCode::kConfig, "k-means needs at least k=" + std::to_string(config.k) +
                                        " points, got " + std::to_string(data.rows()));
  }
  std::mt19937_64 rng(config.seed);
  KMeansResult result;
  result.centroids = kmeans_plus_plus(data, config.k, rng);
  if (config.spherical) {
    for (std::size_t c = 0; c < config.k; ++c) normalize(result.centroids.row(c));
  }
  result.assignment.assign(data.rows(), 0);
  std::vector<double> dist(data.rows(), 0.0);

  double previous = std::numeric_limits<double>::infinity();
  for (uint32_t it = 1; it <= config.max_iterations; ++it) {
    double inertia = assign(data, result.centroids, result.assignment, dist);
    result.iterations = it;
    result.repaired_clusters += repair_empty_clusters(data, result.centroids, result.assignment, dist);
    if (inertia == 0.0) break;
    if (std::isfinite(previous) && (previous - inertia) <= config.relative_tolerance * previous) break;
    previous = inertia;
    update_centroids(data, result.assignment, result.centroids, config.spherical);
  }
  result.inertia = assign(data, result.centroids, result.assignment, dist);
  return result;
}

}  // namespace vecserve
