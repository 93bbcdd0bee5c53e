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

#include <atomic>
#include <chrono>
#include <thread>
#include <memory>
#include <optional>

#include "test_util.h"
#include "vecserve/corpus.h"
#include "vecserve/embed.h"
#include "vecserve/embed_job.h"
#include "vecserve/engine.h"
#include "vecserve/ivfpq.h"
#include "vecserve/synthetic.h"
#include "vecserve/vamana.h"

namespace vecserve::testing {

// Reference encoder whose calls can be slowed down or made to fail like a
// remote one.
class SwitchableEncoder final : public Encoder {
 public:
  explicit SwitchableEncoder(uint32_t dim, std::string name = "switchable") : inner_(dim) {
    descriptor_ = inner_.descriptor();
    descriptor_.name = std::move(name);
  }
  const EncoderDescriptor& descriptor() const override { return descriptor_; }
  Matrix encode(const std::vector<std::string>& texts) const override {
    ++calls_;
    if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_.load()));
    if (fail_) throw RemoteEncoderError("encoder offline", 503, 3, true);
    return inner_.encode(texts);
  }

  std::atomic<bool> fail_{false};
  std::atomic<int> delay_ms_{0};
  mutable std::atomic<int> calls_{0};

 private:
  ReferenceEncoder inner_;
  EncoderDescriptor descriptor_;
};

struct Corpus {
  std::filesystem::path store;
  std::filesystem::path vectors;
  std::filesystem::path graph;
  std::filesystem::path ivfpq;
  std::size_t chunks = 0;
};

inline DocumentSource documents_from(std::vector<Document> docs) {
  auto state = std::make_shared<std::pair<std::vector<Document>, std::size_t>>(std::move(docs), 0);
  return [state]() -> std::optional<Document> {
    if (state->second >= state->first.size()) return std::nullopt;
    return state->first[state->second++];
  };
}

// Synthetic documents chunked, embedded with the reference encoder and
// indexed by both backends.
inline Corpus build_corpus(const std::filesystem::path& dir, std::size_t docs, uint32_t dim = 64,
                           uint32_t n_lists = 16) {
  Corpus c;
  c.store = dir / "store";
  c.vectors = dir / "vectors.bin";
  c.graph = dir / "graph.idx";
  c.ivfpq = dir / "ivfpq.idx";
  ingest(documents_from(synthetic_documents(docs, 40, 3)), {16, 4, false}, c.store);
  ChunkStore store(c.store);
  c.chunks = store.size();
  ReferenceEncoder enc(dim);
  run_embed_job(store, enc, c.vectors);
  VectorFile vf(c.vectors);
  Matrix m = vf.load();
  VamanaParams gp;
  gp.R = 16;
  gp.L_build = 32;
  VamanaGraph::build(m, gp).save(c.graph);
  IvfPqParams ip;
  ip.n_lists = n_lists;
  ip.m = 8;
  IvfPqIndex index = IvfPqIndex::train(m, ip);
  index.add_all(m);
  index.save(c.ivfpq);
  return c;
}

inline EngineConfig engine_config(const Corpus& c, bool graph = true, bool ivfpq = true) {
  EngineConfig cfg;
  cfg.store_dir = c.store;
  if (graph) cfg.graph_index = c.graph;
  if (ivfpq) cfg.ivfpq_index = c.ivfpq;
  cfg.vectors = c.vectors;
  cfg.cache_capacity = 100'000;
  return cfg;
}

}  // namespace vecserve::testing
