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
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vecserve/bench.h"
#include "vecserve/corpus.h"
#include "vecserve/embed.h"
#include "vecserve/embed_job.h"
#include "vecserve/engine.h"
#include "vecserve/ivfpq.h"
#include "vecserve/service.h"
#include "vecserve/synthetic.h"
#include "vecserve/vamana.h"

namespace {

using namespace vecserve;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::string config;
  uint64_t seed = 42;
  uint32_t threads = std::max(1u, std::thread::hardware_concurrency());
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig:
    case ErrorCode::kEmptyCorpus:
    case ErrorCode::kMalformedRecord:
    case ErrorCode::kNotFound:
    case ErrorCode::kDimension:
    case ErrorCode::kZeroVector:
    case ErrorCode::kDuplicateId:
    case ErrorCode::kCorruptIndex:
    case ErrorCode::kVersion:
    case ErrorCode::kModeUnavailable:
      return kExitUsage;
    default:
      return kExitInternal;
  }
}

std::optional<ServeConfig> maybe_config(const GlobalOptions& g) {
  if (g.config.empty()) return std::nullopt;
  return load_serve_config(g.config);
}

ServeConfig require_config(const GlobalOptions& g, const char* command) {
  if (g.config.empty()) {
    throw Error(ErrorCode::kConfig, std::string(command) + " needs --config pointing at a serve config");
  }
  return load_serve_config(g.config);
}

// ingest ----------------------------------------------------------------

struct IngestOptions {
  std::string input;
  std::string out;
  uint32_t window = 256;
  uint32_t overlap = 32;
  bool strict = false;
};

int run_ingest(const IngestOptions& o) {
  ChunkingConfig cfg;
  cfg.window_tokens = o.window;
  cfg.overlap_tokens = o.overlap;
  cfg.strict = o.strict;
  IngestReport report = ingest_jsonl(o.input, cfg, o.out);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << json{{"documents", report.documents},
                    {"chunks", report.chunks},
                    {"skipped_records", report.skipped_records},
                    {"store", o.out}}
                   .dump()
            << "\n";
  return kExitOk;
}

// embed -----------------------------------------------------------------

struct EmbedOptions {
  std::string store;
  std::string out;
  std::size_t batch_size = 4096;
  std::optional<std::size_t> max_batches;
  std::optional<uint32_t> dim;
  std::string encoder_kind;
  std::string endpoint;
  bool rerank_role = false;
};

int run_embed(const GlobalOptions& g, const EmbedOptions& o) {
  EncoderDescriptor d;
  if (auto cfg = maybe_config(g)) d = o.rerank_role ? cfg->engine.rerank_encoder : cfg->engine.retrieval_encoder;
  if (o.dim) d.dim = *o.dim;
  if (!o.encoder_kind.empty()) d.kind = parse_encoder_kind(o.encoder_kind);
  if (!o.endpoint.empty()) d.endpoint = o.endpoint;
  d.validate();
  auto encoder = make_encoder(d);
  ChunkStore store(o.store);

  EmbedJobConfig job;
  job.batch_size = o.batch_size;
  job.max_batches = o.max_batches;
  job.progress = [](std::size_t done, std::size_t total) {
    std::cerr << "embedded batch " << done << "/" << total << "\n";
  };
  EmbedJobReport r = run_embed_job(store, *encoder, o.out, job);
  char checksum[17];
  std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(r.checksum));
  std::cout << json{{"vectors", o.out},
                    {"total_batches", r.total_batches},
                    {"resumed_from", r.resumed_from},
                    {"encoded", r.encoded},
                    {"complete", r.complete},
                    {"checksum", r.complete ? std::string(checksum) : std::string()}}
                   .dump()
            << "\n";
  return kExitOk;
}

// build -----------------------------------------------------------------

struct BuildOptions {
  std::string vectors;
  std::string out;
  std::string backend = "graph";
  uint32_t R = 64;
  uint32_t L_build = 128;
  float alpha = 1.2f;
  std::size_t memory_budget_mb = 0;
  uint32_t n_lists = 0;
  uint32_t m = 8;
  bool exact_codes = false;
};

int run_build(const GlobalOptions& g, const BuildOptions& o) {
  VectorFile file(o.vectors);
  Matrix vectors = file.load();
  json summary = {{"backend", o.backend}, {"out", o.out}, {"N", vectors.rows()}, {"dim", vectors.dim()}};
  if (o.backend == "graph") {
    VamanaParams p;
    p.R = o.R;
    p.L_build = o.L_build;
    p.alpha = o.alpha;
    p.seed = g.seed;
    p.threads = g.threads;
    p.memory_budget_bytes = o.memory_budget_mb * (std::size_t{1} << 20);
    VamanaGraph graph = VamanaGraph::build(vectors, p);
    graph.save(o.out);
    summary.update({{"R", p.R}, {"L_build", p.L_build}, {"alpha", p.alpha}, {"entry_point", graph.entry_point()}});
  } else if (o.backend == "ivfpq") {
    IvfPqParams p;
    p.n_lists = o.n_lists;
    p.m = o.m;
    p.seed = g.seed;
    p.exact_codes = o.exact_codes;
    IvfPqIndex index = IvfPqIndex::train(vectors, p);
    index.add_all(vectors);
    index.save(o.out);
    summary.update({{"n_lists", index.n_lists()},
                    {"m", index.m()},
                    {"coarse_inertia", index.coarse_inertia()},
                    {"train_distortion_mean", index.train_distortion_mean()}});
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown backend '" + o.backend + "'");
  }
  summary["seed"] = g.seed;
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

// serve -----------------------------------------------------------------

struct ServeOptions {
  std::optional<int> port;
  std::optional<std::string> host;
};

int run_serve(const GlobalOptions& g, const ServeOptions& o) {
  ServeConfig cfg = require_config(g, "serve");
  if (o.port) cfg.port = *o.port;
  if (o.host) cfg.host = *o.host;

  // Block before any thread exists so every worker inherits the mask and
  // the signals are only ever delivered to sigwait below.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(cfg);
  int port = service.start();
  std::cerr << "serving on http://" << cfg.host << ":" << port << " (modes:";
  if (service.engine().has_mode(SearchMode::kGraph)) std::cerr << " graph";
  if (service.engine().has_mode(SearchMode::kIvfPq)) std::cerr << " ivfpq";
  std::cerr << ")\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "received signal " << sig << ", draining\n";
  service.shutdown();
  return kExitOk;
}

// query -----------------------------------------------------------------

struct QueryOptions {
  std::string query;
  std::optional<uint32_t> k, K, n_probe, L, W;
  std::optional<double> lambda;
  std::optional<std::string> mode;
  bool exact = false;
  bool diverse = false;
};

int run_query(const GlobalOptions& g, const QueryOptions& o) {
  ServeConfig cfg = require_config(g, "query");
  json body = {{"query", o.query}, {"exact", o.exact}, {"diverse", o.diverse}};
  if (o.k) body["k"] = *o.k;
  if (o.K) body["K"] = *o.K;
  if (o.n_probe) body["n_probe"] = *o.n_probe;
  if (o.L) body["L"] = *o.L;
  if (o.W) body["W"] = *o.W;
  if (o.lambda) body["lambda"] = *o.lambda;
  if (o.mode) body["mode"] = *o.mode;
  ParsedRequest parsed = parse_search_request(body, cfg.engine.defaults);
  if (!parsed.request) {
    for (const auto& e : parsed.errors) std::cerr << "error: " << e.field << ": " << e.message << "\n";
    return kExitUsage;
  }
  Engine engine(cfg.engine);
  SearchResponse response = engine.search(*parsed.request);
  response.warnings.insert(response.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
  std::cout << to_json(response).dump(2) << "\n";
  return kExitOk;
}

// bench -----------------------------------------------------------------

struct BenchOptions {
  std::string vectors;
  std::size_t synthetic_count = 0;
  uint32_t synthetic_dim = 64;
  std::string graph;
  std::string ivfpq;
  std::vector<std::string> backends{"graph", "ivfpq"};
  std::vector<uint32_t> Ls{16, 32, 64, 128};
  uint32_t W = 4;
  std::vector<uint32_t> n_probes{1, 4, 16, 64, 256};
  uint32_t k = 10;
  std::string queries;
  std::size_t n_queries = 100;
  float query_noise = 0.3f;
  std::string csv;
  uint32_t R = 64;
  uint32_t L_build = 128;
  float alpha = 1.2f;
  uint32_t n_lists = 0;
  uint32_t m = 8;
};

int run_bench_cmd(const GlobalOptions& g, const BenchOptions& o) {
  Matrix data;
  Matrix queries;
  if (!o.vectors.empty()) {
    data = VectorFile(o.vectors).load();
  } else if (o.synthetic_count > 0) {
    SyntheticSpec spec;
    spec.count = o.synthetic_count;
    spec.dim = o.synthetic_dim;
    spec.seed = g.seed;
    data = synthetic_vectors(spec);
    if (o.queries.empty()) queries = synthetic_queries(spec, o.n_queries, g.seed + 1);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "bench needs --vectors or --synthetic-count");
  }
  if (!o.queries.empty()) {
    queries = VectorFile(o.queries).load();
  } else if (queries.empty()) {
    queries = perturbed_queries(data.data(), data.rows(), data.dim(), o.n_queries, o.query_noise, g.seed + 1);
  }
  if (queries.dim() != data.dim()) throw Error(ErrorCode::kDimension, "queries and vectors differ in dim");

  std::cerr << "computing brute-force oracle for " << queries.rows() << " queries over " << data.rows()
            << " vectors\n";
  std::vector<std::vector<Hit>> truth;
  truth.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) truth.push_back(brute_force_topk(data, queries.row(i), o.k));

  auto wants = [&](const char* b) { return std::find(o.backends.begin(), o.backends.end(), b) != o.backends.end(); };
  std::vector<BenchRow> rows;
  if (wants("graph")) {
    std::unique_ptr<MappedVamanaGraph> mapped;
    std::unique_ptr<VamanaGraph> built;
    if (!o.graph.empty()) {
      mapped = std::make_unique<MappedVamanaGraph>(o.graph);
    } else {
      VamanaParams p;
      p.R = o.R;
      p.L_build = o.L_build;
      p.alpha = o.alpha;
      p.seed = g.seed;
      p.threads = g.threads;
      std::cerr << "building graph (R=" << p.R << ", L_build=" << p.L_build << ")\n";
      built = std::make_unique<VamanaGraph>(VamanaGraph::build(data, p));
    }
    for (uint32_t L : o.Ls) {
      BeamSearchParams bp;
      bp.L = std::max(L, o.k);
      bp.W = std::min(o.W, bp.L);
      bp.k = o.k;
      SearchFn fn = [&, bp](VectorView q) { return mapped ? mapped->search(q, bp) : built->search(q, bp); };
      rows.push_back(run_bench("graph", "L=" + std::to_string(bp.L) + " W=" + std::to_string(bp.W), fn, queries,
                               truth, o.k, g.threads));
    }
  }
  if (wants("ivfpq")) {
    std::unique_ptr<IvfPqIndex> index;
    if (!o.ivfpq.empty()) {
      index = std::make_unique<IvfPqIndex>(IvfPqIndex::load(o.ivfpq));
    } else {
      IvfPqParams p;
      p.n_lists = o.n_lists;
      p.m = o.m;
      p.seed = g.seed;
      std::cerr << "training ivfpq\n";
      index = std::make_unique<IvfPqIndex>(IvfPqIndex::train(data, p));
      index->add_all(data);
    }
    for (uint32_t n_probe : o.n_probes) {
      if (n_probe > index->n_lists()) {
        std::cerr << "skipping n_probe=" << n_probe << " > n_lists=" << index->n_lists() << "\n";
        continue;
      }
      SearchFn fn = [&, n_probe](VectorView q) { return index->search(q, o.k, n_probe); };
      rows.push_back(run_bench("ivfpq", "n_probe=" + std::to_string(n_probe), fn, queries, truth, o.k, g.threads));
    }
  }
  if (!o.csv.empty()) {
    std::ofstream out(o.csv);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + o.csv);
    write_bench_csv(out, rows);
  }
  write_bench_table(std::cout, rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vecserve: single-node neural retrieval engine"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Serve config file (JSON or key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for builds and sampled queries")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  IngestOptions ingest_o;
  auto* ingest_cmd = app.add_subcommand("ingest", "Chunk a JSON-lines corpus into a chunk store");
  ingest_cmd->add_option("--input", ingest_o.input, "JSON-lines documents")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--out", ingest_o.out, "Chunk store directory")->required();
  ingest_cmd->add_option("--window", ingest_o.window, "Tokens per chunk")->capture_default_str();
  ingest_cmd->add_option("--overlap", ingest_o.overlap, "Tokens shared by adjacent chunks")->capture_default_str();
  ingest_cmd->add_flag("--strict", ingest_o.strict, "Abort on the first malformed record");

  EmbedOptions embed_o;
  auto* embed_cmd = app.add_subcommand("embed", "Encode every chunk into a vector file (resumable)");
  embed_cmd->add_option("--store", embed_o.store, "Chunk store directory")->required()->check(CLI::ExistingDirectory);
  embed_cmd->add_option("--out", embed_o.out, "Output vector file")->required();
  embed_cmd->add_option("--batch-size", embed_o.batch_size, "Texts per batch")->capture_default_str();
  embed_cmd->add_option("--max-batches", embed_o.max_batches, "Stop after this many batches");
  embed_cmd->add_option("--dim", embed_o.dim, "Encoder dimension");
  embed_cmd->add_option("--encoder", embed_o.encoder_kind, "reference or remote");
  embed_cmd->add_option("--endpoint", embed_o.endpoint, "Remote encoder base URL");
  embed_cmd->add_flag("--rerank", embed_o.rerank_role, "Use the rerank encoder from --config");

  BuildOptions build_o;
  auto* build_cmd = app.add_subcommand("build", "Build an index from a vector file");
  build_cmd->add_option("--vectors", build_o.vectors, "Vector file")->required()->check(CLI::ExistingFile);
  build_cmd->add_option("--out", build_o.out, "Index file")->required();
  build_cmd->add_option("--backend", build_o.backend, "graph or ivfpq")
      ->check(CLI::IsMember({"graph", "ivfpq"}))
      ->capture_default_str();
  build_cmd->add_option("--R", build_o.R, "Graph max degree")->capture_default_str();
  build_cmd->add_option("--L-build", build_o.L_build, "Graph build list size")->capture_default_str();
  build_cmd->add_option("--alpha", build_o.alpha, "Graph pruning alpha")->capture_default_str();
  build_cmd->add_option("--memory-budget-mb", build_o.memory_budget_mb, "Graph build memory cap (0: 90% of RAM)");
  build_cmd->add_option("--n-lists", build_o.n_lists, "IVF lists (0: 4*sqrt(N) as a power of two)");
  build_cmd->add_option("--m", build_o.m, "PQ subquantizers")->capture_default_str();
  build_cmd->add_flag("--exact-codes", build_o.exact_codes, "Store raw vectors instead of PQ codes");

  ServeOptions serve_o;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API until SIGINT/SIGTERM");
  serve_cmd->add_option("--port", serve_o.port, "Override the configured port (0: any free port)");
  serve_cmd->add_option("--host", serve_o.host, "Override the configured host");

  QueryOptions query_o;
  auto* query_cmd = app.add_subcommand("query", "Run one search and print the response JSON");
  query_cmd->add_option("query", query_o.query, "Query text")->required();
  query_cmd->add_option("--k", query_o.k);
  query_cmd->add_option("--K", query_o.K);
  query_cmd->add_option("--n-probe", query_o.n_probe);
  query_cmd->add_option("--L", query_o.L);
  query_cmd->add_option("--W", query_o.W);
  query_cmd->add_option("--lambda", query_o.lambda);
  query_cmd->add_option("--mode", query_o.mode)->check(CLI::IsMember({"graph", "ivfpq"}));
  query_cmd->add_flag("--exact", query_o.exact);
  query_cmd->add_flag("--diverse", query_o.diverse);

  BenchOptions bench_o;
  auto* bench_cmd = app.add_subcommand("bench", "Recall and latency sweep against a brute-force oracle");
  bench_cmd->add_option("--vectors", bench_o.vectors, "Vector file to index and scan")->check(CLI::ExistingFile);
  bench_cmd->add_option("--synthetic-count", bench_o.synthetic_count, "Generate this many vectors instead");
  bench_cmd->add_option("--synthetic-dim", bench_o.synthetic_dim)->capture_default_str();
  bench_cmd->add_option("--graph", bench_o.graph, "Prebuilt graph index (otherwise built in memory)")->check(CLI::ExistingFile);
  bench_cmd->add_option("--ivfpq", bench_o.ivfpq, "Prebuilt IVFPQ index (otherwise built in memory)")->check(CLI::ExistingFile);
  bench_cmd->add_option("--backends", bench_o.backends)->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--L", bench_o.Ls, "Graph list sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--W", bench_o.W)->capture_default_str();
  bench_cmd->add_option("--n-probe", bench_o.n_probes, "IVF probe counts")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--k", bench_o.k)->capture_default_str();
  bench_cmd->add_option("--queries", bench_o.queries, "Query vector file (default: seeded held-out sample)");
  bench_cmd->add_option("--n-queries", bench_o.n_queries)->capture_default_str();
  bench_cmd->add_option("--csv", bench_o.csv, "Write the report as CSV");
  bench_cmd->add_option("--R", bench_o.R)->capture_default_str();
  bench_cmd->add_option("--L-build", bench_o.L_build)->capture_default_str();
  bench_cmd->add_option("--alpha", bench_o.alpha)->capture_default_str();
  bench_cmd->add_option("--n-lists", bench_o.n_lists);
  bench_cmd->add_option("--m", bench_o.m)->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest_o);
    if (*embed_cmd) return run_embed(g, embed_o);
    if (*build_cmd) return run_build(g, build_o);
    if (*serve_cmd) return run_serve(g, serve_o);
    if (*query_cmd) return run_query(g, query_o);
    if (*bench_cmd) return run_bench_cmd(g, bench_o);
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
