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
// Acceptance report: one PASS/FAIL line per criterion. Exit status is 0
// when every gating criterion passes; the performance smoke is reported
// but never gates.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "fixture.h"
#include "vecserve/bench.h"
#include "vecserve/io.h"
#include "vecserve/service.h"

using namespace vecserve;
using json = nlohmann::json;
using vecserve::testing::oracle_dot;
using vecserve::testing::oracle_topk;
using vecserve::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const Outcome& o, bool gating = true) {
  std::printf("%s %s: %s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              gating ? "" : " [report-only]");
  std::fflush(stdout);
  if (!o.pass && gating) ++failures;
}

template <typename Fn>
void run_criterion(const std::string& name, Fn fn, bool gating = true) {
  try {
    report(name, fn(), gating);
  } catch (const std::exception& e) {
    report(name, {false, std::string("exception: ") + e.what()}, gating);
  }
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// The 10k x 64 synthetic set shared by the index criteria.
struct Dataset {
  SyntheticSpec spec;
  Matrix data;
  Matrix queries;
  std::vector<std::vector<testing::OracleHit>> truth;
};

Dataset make_dataset() {
  Dataset d;
  d.spec.count = 10'000;
  d.spec.dim = 64;
  d.spec.seed = 42;
  d.data = synthetic_vectors(d.spec);
  d.queries = synthetic_queries(d.spec, 100, 7);
  for (std::size_t i = 0; i < d.queries.rows(); ++i) d.truth.push_back(oracle_topk(d.data, d.queries.row(i), 10));
  return d;
}

VamanaGraph build_graph(const Matrix& data) {
  VamanaParams p;
  p.R = 32;
  p.L_build = 64;
  p.alpha = 1.2f;
  p.seed = 42;
  p.threads = std::max(1u, std::thread::hardware_concurrency());
  return VamanaGraph::build(data, p);
}

IvfPqIndex build_ivfpq(const Matrix& data) {
  IvfPqParams p;
  p.n_lists = 256;
  p.m = 8;
  p.seed = 42;
  IvfPqIndex index = IvfPqIndex::train(data, p);
  index.add_all(data);
  return index;
}

template <typename Search>
double mean_recall(const Dataset& d, Search search) {
  double sum = 0.0;
  for (std::size_t i = 0; i < d.queries.rows(); ++i) sum += testing::oracle_recall(search(d.queries.row(i)), d.truth[i]);
  return sum / static_cast<double>(d.queries.rows());
}

Outcome graph_oracle(const Dataset& d, const VamanaGraph& g, double build_s) {
  auto t0 = Clock::now();
  BeamSearchParams bp{static_cast<uint32_t>(d.data.rows()), 4, 10};
  std::size_t exact = 0;
  std::string first_diff;
  for (std::size_t i = 0; i < d.queries.rows(); ++i) {
    auto hits = g.search(d.queries.row(i), bp);
    if (testing::ids_of(hits) == testing::ids_of(d.truth[i])) {
      ++exact;
    } else if (first_diff.empty()) {
      first_diff = ", first mismatch at query " + std::to_string(i);
    }
  }
  const double total = build_s + seconds_since(t0);
  bool pass = exact == d.queries.rows() && total < 120.0;
  return {pass, std::to_string(exact) + "/" + std::to_string(d.queries.rows()) +
                    " queries identical to brute force (ids and order), build+search " + fmt("%.1f", total) +
                    " s (limit 120 s)" + first_diff};
}

Outcome graph_recall(const Dataset& d, const VamanaGraph& g) {
  double r = mean_recall(d, [&](VectorView q) { return g.search(q, {64, 4, 10}); });
  return {r >= 0.95, "R=32 L_build=64 alpha=1.2 L=64 W=4 mean recall@10 = " + fmt("%.4f", r) + " (need >= 0.95)"};
}

Outcome ivfpq_recall(const Dataset& d, const IvfPqIndex& index) {
  double r = mean_recall(d, [&](VectorView q) { return index.search(q, 10, 32); });

  // Lossless configuration: 256 points, one dimension per subquantizer,
  // so every sub-value is its own codeword.
  auto small = testing::random_unit_vectors(256, 8, 11);
  auto small_q = testing::random_unit_vectors(100, 8, 12);
  IvfPqParams p;
  p.n_lists = 16;
  p.m = 8;
  IvfPqIndex lossless = IvfPqIndex::train(small, p);
  lossless.add_all(small);
  double lr = 0.0;
  for (std::size_t i = 0; i < small_q.rows(); ++i) {
    lr += testing::oracle_recall(lossless.search(small_q.row(i), 10, lossless.n_lists()),
                                 oracle_topk(small, small_q.row(i), 10));
  }
  lr /= static_cast<double>(small_q.rows());
  return {r >= 0.7 && lr == 1.0, "n_lists=256 m=8 n_probe=32 mean recall@10 = " + fmt("%.4f", r) +
                                     " (need >= 0.7); lossless config recall@10 = " + fmt("%.4f", lr) +
                                     " (need 1.0)"};
}

Outcome monotonicity(const Dataset& d, const VamanaGraph& g, const IvfPqIndex& index) {
  bool ok = true;
  std::ostringstream detail;
  double prev = 0.0;
  detail << "graph L{16,32,64,128}:";
  for (uint32_t L : {16u, 32u, 64u, 128u}) {
    double r = mean_recall(d, [&](VectorView q) { return g.search(q, {L, 4, 10}); });
    ok = ok && r >= prev - 0.01;
    prev = r;
    detail << " " << fmt("%.3f", r);
  }
  prev = 0.0;
  detail << "; ivfpq n_probe{1,4,16,64,256}:";
  for (uint32_t n_probe : {1u, 4u, 16u, 64u, 256u}) {
    double r = mean_recall(d, [&](VectorView q) { return index.search(q, 10, n_probe); });
    ok = ok && r >= prev - 0.01;
    prev = r;
    detail << " " << fmt("%.3f", r);
  }
  detail << " (tolerance 0.01)";
  return {ok, detail.str()};
}

Outcome mmr_properties() {
  std::mt19937_64 rng(2024);
  const std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t trials = 0, greedy_ok = 0, first_ok = 0, lambda1_ok = 0, lambda1_trials = 0;
  for (double lambda : lambdas) {
    for (int t = 0; t < 1000; ++t) {
      ++trials;
      const std::size_t n = 8;
      auto vecs = testing::random_unit_vectors(n, 16, rng());
      auto query = testing::random_unit_vectors(1, 16, rng());
      std::vector<ChunkId> ids(n);
      std::iota(ids.begin(), ids.end(), 0);
      std::shuffle(ids.begin(), ids.end(), rng);
      std::vector<MmrCandidate> cands;
      for (std::size_t i = 0; i < n; ++i) cands.push_back({ids[i], vecs.row(i)});
      const std::size_t k = 1 + rng() % n;
      auto picks = mmr_select(query.row(0), cands, k, lambda);

      // Brute-force step-by-step oracle in double precision.
      std::vector<double> rel(n);
      for (std::size_t i = 0; i < n; ++i) rel[i] = oracle_dot(query.row(0).data(), vecs.row(i).data(), 16);
      std::vector<std::size_t> chosen;
      std::vector<bool> used(n, false);
      while (chosen.size() < k) {
        std::size_t best = n;
        double best_score = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (used[i]) continue;
          double s = rel[i];
          if (!chosen.empty()) {
            double red = -1e300;
            for (std::size_t j : chosen) red = std::max(red, oracle_dot(vecs.row(i).data(), vecs.row(j).data(), 16));
            s = lambda * rel[i] - (1.0 - lambda) * red;
          }
          if (best == n || s > best_score || (s == best_score && ids[i] < ids[best])) {
            best = i;
            best_score = s;
          }
        }
        used[best] = true;
        chosen.push_back(best);
      }
      bool same = picks.size() == chosen.size();
      for (std::size_t i = 0; same && i < chosen.size(); ++i) same = picks[i].chunk_id == ids[chosen[i]];
      greedy_ok += same;

      std::size_t argmax = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (rel[i] > rel[argmax] || (rel[i] == rel[argmax] && ids[i] < ids[argmax])) argmax = i;
      }
      first_ok += picks[0].chunk_id == ids[argmax];

      if (lambda == 1.0) {
        ++lambda1_trials;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return rel[a] != rel[b] ? rel[a] > rel[b] : ids[a] < ids[b];
        });
        bool rel_same = true;
        for (std::size_t i = 0; i < picks.size(); ++i) rel_same = rel_same && picks[i].chunk_id == ids[order[i]];
        lambda1_ok += rel_same;
      }
    }
  }
  bool pass = greedy_ok == trials && first_ok == trials && lambda1_ok == lambda1_trials;
  return {pass, "greedy == oracle " + std::to_string(greedy_ok) + "/" + std::to_string(trials) +
                    ", first pick == argmax " + std::to_string(first_ok) + "/" + std::to_string(trials) +
                    ", lambda=1 == relevance order " + std::to_string(lambda1_ok) + "/" +
                    std::to_string(lambda1_trials)};
}

Outcome index_round_trip(const Dataset& d, const VamanaGraph& g, const IvfPqIndex& index,
                         const std::filesystem::path& dir) {
  g.save(dir / "graph.idx");
  index.save(dir / "ivfpq.idx");
  MappedVamanaGraph mapped(dir / "graph.idx");
  IvfPqIndex loaded = IvfPqIndex::load(dir / "ivfpq.idx");
  std::size_t same = 0;
  for (std::size_t i = 0; i < d.queries.rows(); ++i) {
    auto q = d.queries.row(i);
    bool graph_same = mapped.search(q, {64, 4, 10}) == g.search(q, {64, 4, 10}) &&
                      mapped.search(q, {128, 1, 10}) == g.search(q, {128, 1, 10});
    bool ivf_same = loaded.search(q, 10, 32) == index.search(q, 10, 32);
    same += graph_same && ivf_same;
  }

  auto rejected = [&](const std::filesystem::path& src, std::size_t offset, auto open) {
    std::string bytes = read_file(src);
    bytes[offset] ^= 0x20;
    write_file_atomic(dir / "corrupt.idx", bytes);
    try {
      open(dir / "corrupt.idx");
    } catch (const Error& e) {
      return e.code() == ErrorCode::kCorruptIndex;
    }
    return false;
  };
  const auto graph_size = std::filesystem::file_size(dir / "graph.idx");
  const auto ivf_size = std::filesystem::file_size(dir / "ivfpq.idx");
  int corrupt_ok = 0;
  for (std::size_t off : {std::size_t{100}, graph_size / 2, graph_size - 1}) {
    corrupt_ok += rejected(dir / "graph.idx", off, [](const auto& p) { MappedVamanaGraph m(p); });
  }
  for (std::size_t off : {std::size_t{100}, ivf_size / 2, ivf_size - 1}) {
    corrupt_ok += rejected(dir / "ivfpq.idx", off, [](const auto& p) { IvfPqIndex::load(p); });
  }
  bool pass = same == d.queries.rows() && corrupt_ok == 6;
  return {pass, std::to_string(same) + "/" + std::to_string(d.queries.rows()) +
                    " queries bit-identical after save/mmap (graph) and save/load (ivfpq); " +
                    std::to_string(corrupt_ok) + "/6 corrupted files rejected"};
}

// 250 documents x 40 words, windows of 10 with no overlap: 1000 chunks.
struct TextCorpus {
  std::filesystem::path store;
  std::filesystem::path graph;
  std::filesystem::path vectors;
};

TextCorpus build_text_corpus(const std::filesystem::path& dir) {
  TextCorpus c{dir / "text-store", dir / "text-graph.idx", dir / "text-vectors.bin"};
  ingest(testing::documents_from(synthetic_documents(250, 40, 99)), {10, 0, false}, c.store);
  ChunkStore store(c.store);
  ReferenceEncoder enc(64);
  run_embed_job(store, enc, c.vectors);
  VamanaParams p;
  p.R = 32;
  p.L_build = 64;
  VamanaGraph::build(VectorFile(c.vectors).load(), p).save(c.graph);
  return c;
}

ServeConfig text_serve_config(const TextCorpus& c, const std::filesystem::path& votes) {
  ServeConfig cfg;
  cfg.engine.store_dir = c.store;
  cfg.engine.graph_index = c.graph;
  cfg.engine.vectors = c.vectors;
  cfg.engine.retrieval_encoder.dim = 64;
  cfg.engine.rerank_encoder.dim = 64;
  cfg.port = 0;
  cfg.parallelism = 8;
  cfg.vote_log = votes;
  return cfg;
}

json post(httplib::Client& client, const std::string& path, const json& body) {
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("no response from " + path);
  if (res->status != 200) throw std::runtime_error(path + " returned " + std::to_string(res->status) + ": " + res->body);
  return json::parse(res->body);
}

Outcome exact_end_to_end(const TextCorpus& c, const std::filesystem::path& dir) {
  Service service(text_serve_config(c, dir / "exact-votes.jsonl"));
  httplib::Client client("127.0.0.1", service.start());
  const ChunkStore& store = service.engine().store();
  const std::size_t n = store.size();

  ReferenceEncoder enc(64);
  Matrix all(0, 64);
  for (ChunkId id = 0; id < n; ++id) all.append(enc.encode_one(store.text(id)));

  std::vector<std::string> queries;
  for (ChunkId id = 3; queries.size() < 10; id += 97) queries.push_back(store.text(id).substr(0, 30));
  queries.push_back("zzz unrelated words qq");

  std::size_t equal = 0;
  std::string first_diff;
  json cold, warm;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    json req = {{"query", queries[i]}, {"exact", true}, {"K", n}, {"k", 10}};
    json resp = post(client, "/v1/search", req);
    if (i == 0) {
      cold = resp;
      warm = post(client, "/v1/search", req);
    }
    std::vector<uint64_t> ids;
    for (const auto& h : resp["hits"]) ids.push_back(h["chunk_id"].get<uint64_t>());
    auto diff = testing::oracle_mismatch(all, enc.encode_one(queries[i]), ids, 10);
    if (diff.empty()) {
      ++equal;
    } else if (first_diff.empty()) {
      first_diff = "; query " + std::to_string(i) + ": " + diff;
    }
  }
  const double cold_ms = cold["timings"]["total_ms"].get<double>();
  const double warm_ms = warm["timings"]["total_ms"].get<double>();
  const auto warm_misses = warm["cache"]["misses"].get<uint64_t>();
  const bool same_hits = cold["hits"] == warm["hits"];
  bool pass = n == 1000 && equal == queries.size() && warm_misses == 0 && warm_ms < cold_ms && same_hits;
  service.shutdown();
  return {pass, std::to_string(n) + " chunks, K=N: " + std::to_string(equal) + "/" + std::to_string(queries.size()) +
                    " responses equal brute-force top-10; repeat request: " + std::to_string(warm_misses) +
                    " cache misses, total_ms " + fmt("%.2f", warm_ms) + " < cold " + fmt("%.2f", cold_ms) +
                    first_diff};
}

Outcome serving_determinism(const TextCorpus& c, const std::filesystem::path& dir) {
  const auto log = dir / "votes.jsonl";
  std::filesystem::remove(log);
  std::size_t identical = 0, total = 0;
  std::string qid;
  {
    Service service(text_serve_config(c, log));
    const int port = service.start();
    httplib::Client client("127.0.0.1", port);
    for (const json& req : {json{{"query", "kato miru"}},
                            json{{"query", "kato miru"}, {"L", 32}, {"W", 2}, {"k", 5}},
                            json{{"query", "sane poli"}, {"exact", true}, {"K", 200}},
                            json{{"query", "sane poli"}, {"diverse", true}, {"K", 100}, {"lambda", 0.4}},
                            json{{"query", "sane poli"}, {"exact", true}, {"diverse", true}, {"K", 100}}}) {
      json a = post(client, "/v1/search", req);
      json b = post(client, "/v1/search", req);
      ++total;
      identical += a["hits"] == b["hits"];
      qid = a["query_id"];
    }
    for (int i = 0; i < 5; ++i) post(client, "/v1/vote", {{"query_id", qid}, {"chunk_id", i}, {"label", "up"}});

    std::vector<std::thread> threads;
    std::atomic<int> acked{0};
    for (int i = 0; i < 100; ++i) {
      threads.emplace_back([&, i] {
        httplib::Client cl("127.0.0.1", port);
        json v = {{"query_id", "concurrent-" + std::to_string(i)}, {"chunk_id", i}, {"label", i % 3 ? "up" : "down"}};
        auto res = cl.Post("/v1/vote", v.dump(), "application/json");
        if (res && res->status == 200) ++acked;
      });
    }
    for (auto& t : threads) t.join();
    if (acked != 100) return {false, "only " + std::to_string(acked.load()) + "/100 concurrent votes acknowledged"};
    service.shutdown();
  }

  std::size_t parseable = 0, concurrent = 0;
  {
    std::ifstream in(log);
    for (std::string line; std::getline(in, line);) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      ++parseable;
      concurrent += j["query_id"].get<std::string>().rfind("concurrent-", 0) == 0;
    }
  }

  Service restarted(text_serve_config(c, log));
  httplib::Client client("127.0.0.1", restarted.start());
  json dup = post(client, "/v1/vote", {{"query_id", qid}, {"chunk_id", 2}, {"label", "up"}});
  const auto persisted = restarted.handle_stats().body["votes"].get<std::size_t>();
  restarted.shutdown();

  bool pass = identical == total && concurrent == 100 && parseable == 105 && dup["duplicate"] == true &&
              persisted == 105;
  return {pass, std::to_string(identical) + "/" + std::to_string(total) + " repeated requests identical; " +
                    std::to_string(concurrent) + "/100 concurrent votes parsed back (" + std::to_string(parseable) +
                    " lines total); after restart " + std::to_string(persisted) + " votes loaded, duplicate " +
                    (dup["duplicate"] == true ? "recognised" : "NOT recognised")};
}

// Chunks of 32 synthetic words, 4 per document.
Outcome performance_smoke(const std::filesystem::path& work, std::size_t count, uint32_t dim, double seconds) {
  const auto store_dir = work / ("perf-store-" + std::to_string(count));
  const auto vectors = work / ("perf-vectors-" + std::to_string(count) + "x" + std::to_string(dim) + ".bin");
  const auto graph = work / ("perf-graph-" + std::to_string(count) + "x" + std::to_string(dim) + ".idx");
  auto t0 = Clock::now();
  if (!std::filesystem::exists(ChunkStore::header_path(store_dir))) {
    ingest(testing::documents_from(synthetic_documents(count / 4, 128, 5)), {32, 0, false}, store_dir);
  }
  ChunkStore store(store_dir);
  run_embed_job(store, ReferenceEncoder(dim), vectors);
  const double embed_s = seconds_since(t0);
  bool built = false;
  t0 = Clock::now();
  try {
    MappedVamanaGraph probe(graph);
    built = probe.size() == store.size() && probe.dim() == dim;
  } catch (const Error&) {
  }
  if (!built) {
    VamanaParams p;
    p.R = 32;
    p.L_build = 64;
    p.threads = std::max(1u, std::thread::hardware_concurrency());
    VamanaGraph::build(VectorFile(vectors).load(), p).save(graph);
  }
  const double build_s = seconds_since(t0);

  ServeConfig cfg;
  cfg.engine.store_dir = store_dir;
  cfg.engine.graph_index = graph;
  cfg.engine.retrieval_encoder.dim = dim;
  cfg.engine.rerank_encoder.dim = dim;
  cfg.engine.defaults.L = 128;
  cfg.port = 0;
  cfg.parallelism = 8;
  cfg.queue_bound = 64;
  cfg.vote_log = work / "perf-votes.jsonl";
  Service service(cfg);
  const int port = service.start();

  std::vector<std::string> queries;
  for (ChunkId id = 0; queries.size() < 256; id += store.size() / 256) queries.push_back(store.text(id).substr(0, 40));

  std::atomic<bool> stop{false};
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<double> latencies;
  std::atomic<int> errors{0};
  std::vector<std::thread> clients;
  const auto start = Clock::now();
  for (int c = 0; c < 8; ++c) {
    clients.emplace_back([&] {
      httplib::Client client("127.0.0.1", port);
      client.set_keep_alive(true);
      std::vector<double> mine;
      while (!stop) {
        json req = {{"query", queries[next++ % queries.size()]}, {"L", 128}, {"k", 10}};
        auto t = Clock::now();
        auto res = client.Post("/v1/search", req.dump(), "application/json");
        if (!res || res->status != 200) {
          ++errors;
          continue;
        }
        mine.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t).count());
      }
      std::lock_guard lock(mu);
      latencies.insert(latencies.end(), mine.begin(), mine.end());
    });
  }
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  stop = true;
  for (auto& t : clients) t.join();
  const double elapsed = seconds_since(start);
  service.shutdown();

  const double p50 = percentile(latencies, 50);
  const double p99 = percentile(latencies, 99);
  const double qps = static_cast<double>(latencies.size()) / elapsed;
  const unsigned cores = std::thread::hardware_concurrency();
  bool pass = p50 < 50.0 && qps >= 200.0 && errors == 0;
  return {pass, std::to_string(store.size()) + " x " + std::to_string(dim) + " graph L=128, concurrency 8, " +
                    std::to_string(cores) + " core(s): p50 " + fmt("%.2f", p50) + " ms (target < 50), p99 " +
                    fmt("%.2f", p99) + " ms, " + fmt("%.1f", qps) + " QPS (target >= 200), " +
                    std::to_string(errors.load()) + " errors; embed " + fmt("%.1f", embed_s) + " s, build " +
                    fmt("%.1f", build_s) + (built ? " s (cached)" : " s")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vecserve acceptance report"};
  std::filesystem::path work = std::filesystem::temp_directory_path() / "vecserve-acceptance";
  std::size_t perf_count = 100'000;
  uint32_t perf_dim = 768;
  double perf_seconds = 10.0;
  bool skip_perf = false;
  app.add_option("--work-dir", work, "Directory for cached performance artifacts");
  app.add_option("--perf-count", perf_count)->capture_default_str();
  app.add_option("--perf-dim", perf_dim)->capture_default_str();
  app.add_option("--perf-seconds", perf_seconds)->capture_default_str();
  app.add_flag("--skip-perf", skip_perf);
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(work);
  TempDir tmp;

  auto t0 = Clock::now();
  Dataset d = make_dataset();
  VamanaGraph graph = build_graph(d.data);
  const double graph_build_s = seconds_since(t0);
  IvfPqIndex ivfpq = build_ivfpq(d.data);

  run_criterion("graph-oracle-equivalence", [&] { return graph_oracle(d, graph, graph_build_s); });
  run_criterion("graph-recall", [&] { return graph_recall(d, graph); });
  run_criterion("ivfpq-recall", [&] { return ivfpq_recall(d, ivfpq); });
  run_criterion("recall-monotonicity", [&] { return monotonicity(d, graph, ivfpq); });

  TextCorpus text = build_text_corpus(tmp.path());
  run_criterion("exact-search-end-to-end", [&] { return exact_end_to_end(text, tmp.path()); });
  run_criterion("mmr-properties", [&] { return mmr_properties(); });
  run_criterion("serving-determinism-durability", [&] { return serving_determinism(text, tmp.path()); });
  run_criterion("index-round-trip", [&] { return index_round_trip(d, graph, ivfpq, tmp.path()); });
  if (skip_perf) {
    std::printf("SKIP performance-smoke: --skip-perf given [report-only]\n");
  } else {
    run_criterion(
        "performance-smoke", [&] { return performance_smoke(work, perf_count, perf_dim, perf_seconds); }, false);
  }
  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
