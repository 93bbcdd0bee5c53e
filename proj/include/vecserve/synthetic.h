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

#include "vecserve/corpus.h"
#include "vecserve/vectors.h"

namespace vecserve {

/// Seeded Gaussian-mixture generator for unit-norm test vectors.
///
/// Cluster centres are drawn uniformly on the sphere; a point is its
/// centre plus isotropic noise of standard deviation `spread / sqrt(dim)`
/// per coordinate, then normalised. Only mt19937_64 and hand-written
/// transforms are used, so output is identical across standard libraries.
struct SyntheticSpec {
  std::size_t count = 10'000;
  uint32_t dim = 64;
  uint32_t clusters = 1000;
  float spread = 0.5f;
  uint64_t seed = 42;
};

Matrix synthetic_vectors(const SyntheticSpec& spec);

/// `n` further points from the same mixture (same centres), drawn from an
/// independent stream so they are held out from the indexed set.
Matrix synthetic_queries(const SyntheticSpec& spec, std::size_t n, uint64_t query_seed);

/// Held-out queries for an arbitrary vector set: seeded random rows plus
/// Gaussian noise of expected norm `noise`, normalised.
Matrix perturbed_queries(const float* rows, std::size_t n, std::size_t dim, std::size_t count, float noise,
                         uint64_t seed);

/// Documents of pseudo-words over a fixed vocabulary. Each document draws
/// most of its words from one of `topics` word pools so that lexical
/// similarity is non-uniform.
std::vector<Document> synthetic_documents(std::size_t count, std::size_t words_per_doc,
                                          uint64_t seed, std::size_t topics = 16);

}  // namespace vecserve
