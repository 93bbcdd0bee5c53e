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
#include "vecserve/votes.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "vecserve/error.h"

namespace vecserve {

using json = nlohmann::json;

std::string_view vote_label_name(VoteLabel label) { return label == VoteLabel::kUp ? "up" : "down"; }

json to_json(const VoteRecord& vote) {
  json j = {{"query_id", vote.query_id},
            {"chunk_id", vote.chunk_id},
            {"label", vote_label_name(vote.label)},
            {"timestamp", vote.timestamp_ms},
            {"known_query", vote.known_query}};
  if (vote.client) j["client"] = *vote.client;
  return j;
}

VoteRecord vote_from_json(const json& j) {
  VoteRecord v;
  v.query_id = j.at("query_id").get<std::string>();
  v.chunk_id = j.at("chunk_id").get<ChunkId>();
  const auto label = j.at("label").get<std::string>();
  if (label != "up" && label != "down") throw Error(ErrorCode::kMalformedRecord, "bad vote label");
  v.label = label == "up" ? VoteLabel::kUp : VoteLabel::kDown;
  v.timestamp_ms = j.value("timestamp", int64_t{0});
  v.known_query = j.value("known_query", true);
  if (j.contains("client") && j["client"].is_string()) v.client = j["client"].get<std::string>();
  return v;
}

VoteLog::VoteLog(const std::filesystem::path& path) : path_(path) {
  for (const auto& v : read_all(path)) {
    keys_.emplace(v.query_id, v.chunk_id, v.label);
    ++records_;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::kIo, "cannot open vote log " + path.string() + ": " + std::strerror(errno));
  }
}

VoteLog::~VoteLog() { close(); }

void VoteLog::close() {
  std::lock_guard lock(mu_);
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
    fd_ = -1;
  }
}

VoteAck VoteLog::append(const VoteRecord& vote) {
  std::string line = to_json(vote).dump() + "\n";
  std::lock_guard lock(mu_);
  if (fd_ < 0) throw Error(ErrorCode::kIo, "vote log is closed");
  VoteAck ack;
  ack.known_query = vote.known_query;
  Key key{vote.query_id, vote.chunk_id, vote.label};
  if (keys_.contains(key)) {
    ack.duplicate = true;
    return ack;
  }
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, "vote log write failed: " + std::string(std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw Error(ErrorCode::kIo, "vote log fsync failed: " + std::string(std::strerror(errno)));
  }
  keys_.insert(std::move(key));
  ++records_;
  return ack;
}

std::size_t VoteLog::size() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::vector<VoteRecord> VoteLog::read_all(const std::filesystem::path& path) {
  std::vector<VoteRecord> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(vote_from_json(json::parse(line)));
    } catch (const std::exception&) {
      // A torn final line from a crash mid-write; the vote was never acked.
    }
  }
  return out;
}

void QueryRegistry::add(const std::string& query_id) {
  std::lock_guard lock(mu_);
  if (!ids_.insert(query_id).second) return;
  order_.push_back(query_id);
  while (order_.size() > capacity_) {
    ids_.erase(order_.front());
    order_.pop_front();
  }
}

bool QueryRegistry::contains(const std::string& query_id) const {
  std::lock_guard lock(mu_);
  return ids_.contains(query_id);
}

std::size_t QueryRegistry::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

}  // namespace vecserve
