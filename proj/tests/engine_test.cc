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
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "fixture.h"

using namespace vecserve;
using json = nlohmann::json;
using vecserve::testing::SwitchableEncoder;
using vecserve::testing::TempDir;

namespace {

std::set<std::string> error_fields(const ParsedRequest& p) {
  std::set<std::string> out;
  for (const auto& e : p.errors) out.insert(e.field);
  return out;
}

bool has_warning(const std::vector<std::string>& warnings, const std::string& needle) {
  return std::any_of(warnings.begin(), warnings.end(),
                     [&](const std::string& w) { return w.find(needle) != std::string::npos; });
}

class EngineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    corpus_ = new vecserve::testing::Corpus(vecserve::testing::build_corpus(dir_->path(), 120));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete dir_;
  }

  std::unique_ptr<Engine> make_engine(bool graph = true, bool ivfpq = true) {
    auto rerank = std::make_unique<SwitchableEncoder>(32, "rerank");
    rerank_ = rerank.get();
    return std::make_unique<Engine>(vecserve::testing::engine_config(*corpus_, graph, ivfpq),
                                    std::make_unique<ReferenceEncoder>(64), std::move(rerank));
  }

  static SearchRequest request(const std::string& query) {
    SearchRequest r;
    r.query = query;
    return r;
  }

  static TempDir* dir_;
  static vecserve::testing::Corpus* corpus_;
  SwitchableEncoder* rerank_ = nullptr;
};

TempDir* EngineTest::dir_ = nullptr;
vecserve::testing::Corpus* EngineTest::corpus_ = nullptr;

}  // namespace

TEST(ParseRequestTest, DefaultsApplied) {
  SearchDefaults d;
  d.k = 7;
  d.lambda = 0.25;
  auto p = parse_search_request(json{{"query", "hello"}}, d);
  ASSERT_TRUE(p.request);
  EXPECT_EQ(p.request->k, 7u);
  EXPECT_EQ(p.request->lambda, 0.25);
  EXPECT_FALSE(p.request->exact);
  EXPECT_FALSE(p.request->n_probe_set);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(ParseRequestTest, FieldErrorsListed) {
  SearchDefaults d;
  auto p = parse_search_request(
      json{{"k", 0}, {"lambda", 1.5}, {"mode", "hnsw"}, {"exact", "yes"}, {"W", -1}, {"L", 2.5}}, d);
  EXPECT_FALSE(p.request);
  EXPECT_EQ(error_fields(p), (std::set<std::string>{"query", "k", "lambda", "mode", "exact", "W", "L"}));

  EXPECT_EQ(error_fields(parse_search_request(json{{"query", "   "}}, d)), std::set<std::string>{"query"});
  EXPECT_EQ(error_fields(parse_search_request(json{{"query", "x"}, {"k", 20}, {"K", 5}}, d)),
            std::set<std::string>{"K"});
  EXPECT_EQ(error_fields(parse_search_request(json{{"query", "x"}, {"lambda", "a"}}, d)),
            std::set<std::string>{"lambda"});
  EXPECT_EQ(parse_search_request(json::array(), d).errors.size(), 1u);
}

TEST(ParseRequestTest, InapplicableParametersWarn) {
  SearchDefaults d;
  auto graph = parse_search_request(json{{"query", "x"}, {"n_probe", 4}, {"extra", 1}}, d);
  ASSERT_TRUE(graph.request);
  EXPECT_TRUE(has_warning(graph.warnings, "n_probe"));
  EXPECT_TRUE(has_warning(graph.warnings, "extra"));
  auto ivf = parse_search_request(json{{"query", "x"}, {"mode", "ivfpq"}, {"L", 40}}, d);
  ASSERT_TRUE(ivf.request);
  EXPECT_TRUE(has_warning(ivf.warnings, "L and W"));
  EXPECT_TRUE(ivf.request->L_set);
}

TEST_F(EngineTest, AnnPathReturnsRankedChunks) {
  auto engine = make_engine();
  auto query = engine->store().text(42);
  for (auto mode : {SearchMode::kGraph, SearchMode::kIvfPq}) {
    auto r = request(query);
    r.mode = mode;
    r.k = 5;
    auto resp = engine->search(r);
    ASSERT_EQ(resp.hits.size(), 5u);
    EXPECT_EQ(resp.query_id.size(), 32u);
    for (std::size_t i = 0; i < resp.hits.size(); ++i) {
      const auto& h = resp.hits[i];
      EXPECT_EQ(h.rank, i + 1);
      EXPECT_EQ(h.stage, Stage::kAnn);
      Chunk c = engine->store().lookup(h.chunk_id);
      EXPECT_EQ(h.text, c.text);
      EXPECT_EQ(h.doc_id, c.doc_id);
      if (i > 0) {
        EXPECT_GE(resp.hits[i - 1].score, h.score);
      }
    }
    EXPECT_EQ(resp.timings.exact_ms, 0.0);
    EXPECT_GE(resp.timings.total_ms, resp.timings.ann_ms);
    EXPECT_EQ(resp.effective_params["mode"], std::string(mode_name(mode)));
  }
}

TEST_F(EngineTest, GraphSelfQueryFindsChunk) {
  auto engine = make_engine();
  for (ChunkId id = 0; id < engine->store().size(); id += 29) {
    auto resp = engine->search(request(engine->store().text(id)));
    ASSERT_FALSE(resp.hits.empty());
    EXPECT_EQ(resp.hits[0].chunk_id, id);
  }
}

TEST_F(EngineTest, ExactOverWholeCorpusMatchesOracle) {
  auto engine = make_engine();
  const auto n = static_cast<uint32_t>(engine->store().size());
  auto r = request("bakito moru");
  r.exact = true;
  r.K = n;
  r.L = n;
  auto resp = engine->search(r);

  ReferenceEncoder oracle_enc(32);
  Matrix docs(0, 32);
  for (ChunkId id = 0; id < n; ++id) docs.append(oracle_enc.encode_one(engine->store().text(id)));
  auto q = oracle_enc.encode_one(r.query);
  auto truth = vecserve::testing::oracle_topk(docs, q, r.k);
  std::vector<uint64_t> ids;
  for (const auto& h : resp.hits) ids.push_back(h.chunk_id);
  EXPECT_EQ(vecserve::testing::oracle_mismatch(docs, q, ids, r.k), "");
  ASSERT_EQ(resp.hits.size(), truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    EXPECT_NEAR(resp.hits[i].score, truth[i].score, 1e-5);
    EXPECT_EQ(resp.hits[i].stage, Stage::kExact);
  }
  EXPECT_EQ(resp.cache_misses, n);
  auto again = engine->search(r);
  EXPECT_EQ(again.cache_misses, 0u);
  EXPECT_EQ(again.cache_hits, n);
}

TEST_F(EngineTest, UnloadedModeRejected) {
  auto engine = make_engine(false, true);
  auto r = request("x");
  EXPECT_TRUE(engine->has_mode(SearchMode::kIvfPq));
  EXPECT_FALSE(engine->has_mode(SearchMode::kGraph));
  try {
    engine->search(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModeUnavailable);
  }
  r.mode = SearchMode::kIvfPq;
  r.diverse = true;
  EXPECT_EQ(engine->search(r).hits.front().stage, Stage::kMmr);
}

TEST_F(EngineTest, EffectiveParametersReported) {
  auto engine = make_engine();
  auto r = request("query text");
  r.exact = true;
  r.K = 200;
  r.L = 64;
  auto graph = engine->search(r);
  EXPECT_EQ(graph.effective_params["L"], 200);
  EXPECT_TRUE(has_warning(graph.warnings, "L raised to 200"));

  r.mode = SearchMode::kIvfPq;
  auto clamped = engine->search(r);
  EXPECT_EQ(clamped.effective_params["n_probe"], 16);
  EXPECT_TRUE(has_warning(clamped.warnings, "clamped"));

  r.n_probe = 17;
  r.n_probe_set = true;
  try {
    engine->search(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST_F(EngineTest, DiverseSearchSelectsDistinctChunks) {
  auto engine = make_engine();
  for (bool exact : {false, true}) {
    auto r = request(engine->store().text(3));
    r.diverse = true;
    r.exact = exact;
    r.K = 50;
    r.k = 8;
    r.lambda = 0.3;
    auto resp = engine->search(r);
    ASSERT_EQ(resp.hits.size(), 8u);
    std::set<ChunkId> ids;
    for (const auto& h : resp.hits) {
      EXPECT_EQ(h.stage, Stage::kMmr);
      ids.insert(h.chunk_id);
    }
    EXPECT_EQ(ids.size(), 8u);
    EXPECT_EQ(resp.effective_params["lambda"], 0.3);
  }
}

TEST_F(EngineTest, RerankOutageDegradesToAnnResults) {
  auto engine = make_engine();
  auto r = request(engine->store().text(8));
  auto plain = engine->search(r);
  rerank_->fail_ = true;
  r.exact = true;
  auto resp = engine->search(r);
  EXPECT_TRUE(resp.degraded);
  EXPECT_TRUE(has_warning(resp.warnings, "rerank unavailable"));
  ASSERT_EQ(resp.hits.size(), plain.hits.size());
  for (std::size_t i = 0; i < resp.hits.size(); ++i) {
    EXPECT_EQ(resp.hits[i].chunk_id, plain.hits[i].chunk_id);
    EXPECT_EQ(resp.hits[i].stage, Stage::kAnn);
  }
}

TEST_F(EngineTest, RepeatedAndConcurrentRequestsAgree) {
  auto engine = make_engine();
  std::vector<SearchRequest> requests;
  for (ChunkId id = 0; id < 24; ++id) {
    auto r = request(engine->store().text(id * 5));
    r.mode = id % 2 ? SearchMode::kIvfPq : SearchMode::kGraph;
    r.exact = id % 3 == 0;
    r.diverse = id % 4 == 0;
    r.K = 40;
    requests.push_back(r);
  }
  auto ids = [](const SearchResponse& resp) {
    std::vector<std::pair<ChunkId, float>> out;
    for (const auto& h : resp.hits) out.emplace_back(h.chunk_id, h.score);
    return out;
  };
  std::vector<std::vector<std::pair<ChunkId, float>>> serial;
  std::set<std::string> query_ids;
  for (const auto& r : requests) {
    auto resp = engine->search(r);
    serial.push_back(ids(resp));
    query_ids.insert(resp.query_id);
    EXPECT_EQ(ids(engine->search(r)), serial.back());
  }
  EXPECT_EQ(query_ids.size(), requests.size());

  std::atomic<int> mismatches{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < requests.size(); i += 2) {
        if (ids(engine->search(requests[i])) != serial[i]) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST_F(EngineTest, ResponseJsonShape) {
  auto engine = make_engine();
  auto j = to_json(engine->search(request("abc")));
  for (const char* key : {"query_id", "hits", "timings", "cache", "warnings", "params", "degraded"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["hits"][0]["stage"], "ann");
  EXPECT_TRUE(j["timings"].contains("total_ms"));
  auto d = engine->describe();
  EXPECT_EQ(d["corpus_size"], corpus_->chunks);
  EXPECT_EQ(d["modes"], json::array({"graph", "ivfpq"}));
}

TEST_F(EngineTest, MisconfiguredArtifactsRejected) {
  auto cfg = vecserve::testing::engine_config(*corpus_);
  try {
    Engine(cfg, std::make_unique<ReferenceEncoder>(32), std::make_unique<ReferenceEncoder>(32));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimension);
  }
  cfg.store_dir = dir_->path() / "missing";
  try {
    Engine(cfg, std::make_unique<ReferenceEncoder>(64), std::make_unique<ReferenceEncoder>(32));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("store"), std::string::npos);
  }
  auto none = vecserve::testing::engine_config(*corpus_, false, false);
  EXPECT_THROW(Engine(none, std::make_unique<ReferenceEncoder>(64), std::make_unique<ReferenceEncoder>(32)),
               Error);
}
