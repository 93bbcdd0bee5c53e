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
#include "vecserve/service.h"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace vecserve {

using json = nlohmann::json;

namespace {

constexpr auto kQpsWindow = std::chrono::seconds(60);

int64_t utc_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

HttpReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", code}, {"message", message}}, std::nullopt};
}

HttpReply reply_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig:
    case ErrorCode::kDimension:
      return error_reply(400, "ValidationError", e.what());
    case ErrorCode::kModeUnavailable:
      return error_reply(400, "ModeUnavailable", e.what());
    case ErrorCode::kNotFound:
      return error_reply(404, "NotFound", e.what());
    default:
      return error_reply(500, error_code_name(e.code()), e.what());
  }
}

}  // namespace

void LatencyWindow::record(double ms) {
  std::lock_guard lock(mu_);
  samples_.push_back(ms);
  if (samples_.size() > capacity_) samples_.pop_front();
}

double LatencyWindow::percentile(double p) const {
  std::vector<double> sorted;
  {
    std::lock_guard lock(mu_);
    sorted.assign(samples_.begin(), samples_.end());
  }
  if (sorted.empty()) return 0.0;
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::size_t LatencyWindow::count() const {
  std::lock_guard lock(mu_);
  return samples_.size();
}

ServiceStats::ServiceStats() : started_(Clock::now()) {}

void ServiceStats::record(const StageTimings& timings, bool exact, bool diverse) {
  ++queries_;
  ann_.record(timings.ann_ms);
  if (exact) exact_.record(timings.exact_ms);
  if (diverse) mmr_.record(timings.mmr_ms);
  total_.record(timings.total_ms);
  auto now = Clock::now();
  std::lock_guard lock(mu_);
  recent_.push_back(now);
  while (!recent_.empty() && now - recent_.front() > kQpsWindow) recent_.pop_front();
}

double ServiceStats::qps() const {
  auto now = Clock::now();
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto t : recent_) {
    if (now - t <= kQpsWindow) ++n;
  }
  if (n == 0) return 0.0;
  double window = std::chrono::duration<double>(std::min<Clock::duration>(now - started_, kQpsWindow)).count();
  return static_cast<double>(n) / std::max(window, 1.0);
}

json ServiceStats::snapshot() const {
  auto stage = [](const LatencyWindow& w) {
    return json{{"count", w.count()}, {"p50", w.percentile(50)}, {"p95", w.percentile(95)}, {"p99", w.percentile(99)}};
  };
  return {{"queries", queries_.load()},
          {"qps", qps()},
          {"uptime_s", std::chrono::duration<double>(Clock::now() - started_).count()},
          {"latency_ms",
           {{"ann", stage(ann_)}, {"exact", stage(exact_)}, {"mmr", stage(mmr_)}, {"total", stage(total_)}}}};
}

Service::Service(ServeConfig config)
    : Service(std::make_shared<Engine>(config.engine), config) {}

Service::Service(std::shared_ptr<Engine> engine, ServeConfig config)
    : config_(std::move(config)),
      engine_(std::move(engine)),
      votes_(config_.vote_log),
      registry_(config_.registry_capacity),
      slots_(static_cast<std::ptrdiff_t>(config_.parallelism)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

Service::~Service() { shutdown(); }

HttpReply Service::handle_search(const std::string& body) {
  if (draining_.load()) return error_reply(503, "ShuttingDown", "server is draining");
  const uint32_t pending = ++pending_;
  struct Leave {
    std::atomic<uint32_t>& counter;
    ~Leave() { --counter; }
  } leave{pending_};
  if (pending > config_.parallelism + config_.queue_bound) {
    HttpReply r = error_reply(429, "Overloaded", "too many queued requests");
    r.retry_after_s = 1;
    return r;
  }

  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, "ValidationError", std::string("invalid JSON: ") + e.what());
  }
  ParsedRequest parsed = parse_search_request(doc, engine_->config().defaults);
  if (!parsed.request) {
    json fields = json::array();
    for (const auto& f : parsed.errors) fields.push_back({{"field", f.field}, {"message", f.message}});
    return {400, json{{"error", "ValidationError"}, {"fields", fields}}, std::nullopt};
  }

  slots_.acquire();
  struct Release {
    std::counting_semaphore<4096>& sem;
    ~Release() { sem.release(); }
  } release{slots_};
  try {
    SearchResponse response = engine_->search(*parsed.request);
    response.warnings.insert(response.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
    registry_.add(response.query_id);
    stats_.record(response.timings, parsed.request->exact, parsed.request->diverse);
    return {200, to_json(response), std::nullopt};
  } catch (const Error& e) {
    return reply_for(e);
  }
}

HttpReply Service::handle_vote(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    return error_reply(400, "ValidationError", std::string("invalid JSON: ") + e.what());
  }
  json fields = json::array();
  if (!doc.is_object()) {
    return error_reply(400, "ValidationError", "vote must be a JSON object");
  }
  if (!doc.contains("query_id") || !doc["query_id"].is_string() || doc["query_id"].get<std::string>().empty()) {
    fields.push_back({{"field", "query_id"}, {"message", "required non-empty string"}});
  }
  if (!doc.contains("chunk_id") || !doc["chunk_id"].is_number_integer() || doc["chunk_id"].get<int64_t>() < 0) {
    fields.push_back({{"field", "chunk_id"}, {"message", "required integer >= 0"}});
  }
  if (!doc.contains("label") || (doc["label"] != "up" && doc["label"] != "down")) {
    fields.push_back({{"field", "label"}, {"message", "must be \"up\" or \"down\""}});
  }
  if (doc.contains("client") && !doc["client"].is_string()) {
    fields.push_back({{"field", "client"}, {"message", "must be a string"}});
  }
  if (!fields.empty()) return {400, json{{"error", "ValidationError"}, {"fields", fields}}, std::nullopt};

  VoteRecord vote;
  vote.query_id = doc["query_id"].get<std::string>();
  vote.chunk_id = doc["chunk_id"].get<ChunkId>();
  vote.label = doc["label"] == "up" ? VoteLabel::kUp : VoteLabel::kDown;
  vote.timestamp_ms = utc_now_ms();
  if (doc.contains("client")) vote.client = doc["client"].get<std::string>();
  vote.known_query = registry_.contains(vote.query_id);
  try {
    VoteAck ack = votes_.append(vote);
    return {200,
            json{{"ok", true}, {"duplicate", ack.duplicate}, {"flagged", !ack.known_query}, {"timestamp", vote.timestamp_ms}},
            std::nullopt};
  } catch (const Error& e) {
    return reply_for(e);
  }
}

HttpReply Service::handle_stats() const {
  json out = engine_->describe();
  const RerankCache& cache = engine_->cache();
  const uint64_t hits = cache.total_hits();
  const uint64_t misses = cache.total_misses();
  out["cache"] = {{"size", cache.size()},
                  {"capacity", cache.capacity()},
                  {"hits", hits},
                  {"misses", misses},
                  {"hit_rate", hits + misses == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(hits + misses)}};
  out.update(stats_.snapshot());
  out["votes"] = votes_.size();
  out["in_flight"] = pending_.load();
  out["ready"] = ready();
  return {200, out, std::nullopt};
}

HttpReply Service::handle_health() const {
  if (!ready()) return {503, json{{"status", draining_.load() ? "draining" : "starting"}}, std::nullopt};
  return {200, json{{"status", "ready"}}, std::nullopt};
}

void Service::install_routes() {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    if (reply.retry_after_s) res.set_header("Retry-After", std::to_string(*reply.retry_after_s));
    res.set_content(reply.body.dump(), "application/json");
  };
  server_->Post("/v1/search", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_search(req.body));
  });
  server_->Post("/v1/vote", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, handle_vote(req.body));
  });
  server_->Get("/v1/stats", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_stats());
  });
  server_->Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, handle_health());
  });
  if (config_.ui_dir) {
    if (!server_->set_mount_point("/ui", config_.ui_dir->string())) {
      throw Error(ErrorCode::kConfig, "ui_dir '" + config_.ui_dir->string() + "' is not a directory");
    }
  }
  const std::size_t workers = config_.parallelism + config_.queue_bound;
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
}

int Service::start() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  ready_ = true;
  return port_;
}

void Service::shutdown() {
  std::call_once(shutdown_once_, [this] {
    draining_ = true;
    auto deadline = std::chrono::steady_clock::now() + config_.drain_timeout;
    while (pending_.load() > 0 && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (pending_.load() > 0) {
      std::cerr << "warning: shutting down with " << pending_.load() << " searches still in flight\n";
    }
    server_->stop();
    if (listener_.joinable()) listener_.join();
    votes_.close();
    ready_ = false;
  });
}

}  // namespace vecserve
