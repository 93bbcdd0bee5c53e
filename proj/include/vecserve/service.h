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
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "vecserve/engine.h"
#include "vecserve/votes.h"

namespace httplib {
class Server;
}

namespace vecserve {

struct ServeConfig {
  EngineConfig engine;
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  uint32_t parallelism = 8;
  // Requests allowed to wait for a search slot; beyond this: 429.
  uint32_t queue_bound = 64;
  std::chrono::milliseconds drain_timeout{10000};
  std::filesystem::path vote_log = "votes.jsonl";
  std::optional<std::filesystem::path> ui_dir;
  std::size_t registry_capacity = 100'000;
};

/// Parses a config document. Keys may be nested JSON objects or dotted
/// names ("retrieval_encoder.dim"); see README for the full list.
ServeConfig serve_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads a JSON file, or a `key = value` file when the first non-blank
/// character is not '{'. Relative artifact paths resolve against the
/// config file's directory.
ServeConfig load_serve_config(const std::filesystem::path& path);

/// `key = value` lines ('#' comments) to a nested JSON object. Values are
/// parsed as JSON when possible and kept as strings otherwise.
nlohmann::json parse_key_value_config(std::string_view text);

/// Rolling window of latency samples.
class LatencyWindow {
 public:
  explicit LatencyWindow(std::size_t capacity = 10'000) : capacity_(capacity) {}

  void record(double ms);
  // Nearest-rank percentile, p in (0, 100]. 0 when empty.
  double percentile(double p) const;
  std::size_t count() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<double> samples_;
};

class ServiceStats {
 public:
  ServiceStats();

  void record(const StageTimings& timings, bool exact, bool diverse);
  uint64_t queries() const { return queries_.load(); }
  double qps() const;
  nlohmann::json snapshot() const;

 private:
  using Clock = std::chrono::steady_clock;

  Clock::time_point started_;
  std::atomic<uint64_t> queries_{0};
  LatencyWindow ann_, exact_, mmr_, total_;
  mutable std::mutex mu_;
  std::deque<Clock::time_point> recent_;
};

struct HttpReply {
  int status = 200;
  nlohmann::json body;
  std::optional<int> retry_after_s;
};

/// HTTP front end over an Engine.
///
///   POST /v1/search   SearchRequest JSON -> SearchResponse JSON
///   POST /v1/vote     {"query_id", "chunk_id", "label": "up"|"down", "client"?}
///   GET  /v1/stats
///   GET  /healthz
///   /ui/*             static files from ui_dir, when configured
class Service {
 public:
  // Loads the engine from config.engine; fails fast on bad artifacts.
  explicit Service(ServeConfig config);
  Service(std::shared_ptr<Engine> engine, ServeConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Refuses new searches, waits up to drain_timeout for in-flight ones,
  /// stops the listener and closes the vote log. Idempotent.
  void shutdown();
  bool ready() const { return ready_.load() && !draining_.load(); }

  HttpReply handle_search(const std::string& body);
  HttpReply handle_vote(const std::string& body);
  HttpReply handle_stats() const;
  HttpReply handle_health() const;

  Engine& engine() { return *engine_; }
  const ServiceStats& stats() const { return stats_; }
  int port() const { return port_; }

 private:
  void install_routes();

  ServeConfig config_;
  std::shared_ptr<Engine> engine_;
  VoteLog votes_;
  QueryRegistry registry_;
  ServiceStats stats_;
  std::counting_semaphore<4096> slots_;
  std::atomic<uint32_t> pending_{0};
  std::atomic<bool> ready_{false};
  std::atomic<bool> draining_{false};
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  std::once_flag shutdown_once_;
  int port_ = 0;
};

}  // namespace vecserve
