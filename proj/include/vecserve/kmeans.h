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
#include <vector>

#include "vecserve/vectors.h"

namespace vecserve {

struct KMeansConfig {
  std::size_t k = 0;
  uint32_t max_iterations = 25;
  // Stop once (previous - current) / previous inertia falls below this.
  double relative_tolerance = 1e-4;
  uint64_t seed = 42;
  // Project centroids back onto the unit sphere after every update. For
  // unit-norm data this makes nearest-by-L2 and largest-inner-product agree.
  bool spherical = false;
};

struct KMeansResult {
  Matrix centroids;
  std::vector<uint32_t> assignment;
  // Sum of squared L2 distances from each point to its assigned centroid.
  double inertia = 0.0;
  uint32_t iterations = 0;
  uint32_t repaired_clusters = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are repaired by
/// moving the member of the largest cluster that lies farthest from its
/// centroid into the empty one. Deterministic for a given seed.
KMeansResult kmeans(const Matrix& data, const KMeansConfig& config);

/// Index of the centroid with the smallest squared L2 distance (ties: lowest index).
uint32_t nearest_centroid(const Matrix& centroids, VectorView v);

}  // namespace vecserve
