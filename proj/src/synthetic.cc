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
#include "vecserve/synthetic.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "vecserve/error.h"

namespace vecserve {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller; std::normal_distribution differs between standard libraries.
class Gaussian {
 public:
  explicit Gaussian(uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(rng_);
    while (u1 <= 0.0) u1 = uniform01(rng_);
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

Matrix cluster_centres(const SyntheticSpec& spec) {
  Gaussian g(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  Matrix centres(std::max<uint32_t>(spec.clusters, 1), spec.dim);
  for (std::size_t c = 0; c < centres.rows(); ++c) {
    auto row = centres.row(c);
    do {
      for (auto& x : row) x = static_cast<float>(g.next());
    } while (!normalize(row));
  }
  return centres;
}

Matrix sample_mixture(const SyntheticSpec& spec, const Matrix& centres, std::size_t n, uint64_t seed) {
  Gaussian g(seed);
  Matrix out(n, spec.dim);
  const double sigma = spec.spread / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(g.engine()() % centres.rows());
    auto row = out.row(i);
    auto centre = centres.row(c);
    do {
      for (std::size_t d = 0; d < spec.dim; ++d) {
        row[d] = static_cast<float>(centre[d] + sigma * g.next());
      }
    } while (!normalize(row));
  }
  return out;
}

}  // namespace

Matrix synthetic_vectors(const SyntheticSpec& spec) {
  return sample_mixture(spec, cluster_centres(spec), spec.count, spec.seed);
}

Matrix synthetic_queries(const SyntheticSpec& spec, std::size_t n, uint64_t query_seed) {
  return sample_mixture(spec, cluster_centres(spec), n, query_seed ^ 0xd1b54a32d192ed03ULL);
}

Matrix perturbed_queries(const float* rows, std::size_t n, std::size_t dim, std::size_t count, float noise,
                         uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::kEmptyCorpus, "cannot sample queries from an empty vector set");
  Gaussian g(seed);
  Matrix out(count, dim);
  const double sigma = noise / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    const float* base = rows + (g.engine()() % n) * dim;
    auto row = out.row(i);
    do {
      for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(base[d] + sigma * g.next());
    } while (!normalize(row));
  }
  return out;
}

std::vector<Document> synthetic_documents(std::size_t count, std::size_t words_per_doc, uint64_t seed,
                                          std::size_t topics) {
  static constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo",
                                               "be", "da", "fu", "gi", "ho", "ja", "pe", "zu"};
  constexpr std::size_t kVocabulary = 2048;
  std::mt19937_64 rng(seed);
  std::vector<std::string> vocab(kVocabulary);
  for (std::size_t w = 0; w < kVocabulary; ++w) {
    std::size_t syllables = 2 + w % 3;
    std::size_t code = w * 2654435761ULL;
    for (std::size_t s = 0; s < syllables; ++s) {
      vocab[w] += kSyllables[code % 16];
      code /= 16;
    }
    vocab[w] += std::to_string(w % 7);
  }
  topics = std::max<std::size_t>(topics, 1);
  const std::size_t pool = kVocabulary / topics;

  std::vector<Document> docs;
  docs.reserve(count);
  for (std::size_t d = 0; d < count; ++d) {
    const std::size_t topic = rng() % topics;
    Document doc;
    doc.doc_id = "doc-" + std::to_string(d);
    doc.source = "synthetic/topic-" + std::to_string(topic);
    for (std::size_t i = 0; i < words_per_doc; ++i) {
      std::size_t word = uniform01(rng) < 0.8 ? topic * pool + rng() % pool : rng() % kVocabulary;
      if (i > 0) doc.text += ' ';
      doc.text += vocab[word];
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace vecserve
