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
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vecserve/corpus.h"

namespace vecserve {

enum class VoteLabel { kUp, kDown };

std::string_view vote_label_name(VoteLabel label);

struct VoteRecord {
  std::string query_id;
  ChunkId chunk_id = 0;
  VoteLabel label = VoteLabel::kUp;
  int64_t timestamp_ms = 0;  // UTC, assigned by the server
  std::optional<std::string> client;
  // False when query_id was not found in the recent-query registry.
  bool known_query = true;
};

nlohmann::json to_json(const VoteRecord& vote);
VoteRecord vote_from_json(const nlohmann::json& j);

struct VoteAck {
  bool duplicate = false;
  bool known_query = true;
};

/// Append-only JSON-lines vote log. Every new record is written with a
/// single write(2) on an O_APPEND descriptor and fsync'd before `append`
/// returns. Records repeating an earlier (query_id, chunk_id, label) are
/// acknowledged without being written again; the key set is rebuilt from
/// the file on open so this holds across restarts.
class VoteLog {
 public:
  explicit VoteLog(const std::filesystem::path& path);
  ~VoteLog();

  VoteLog(const VoteLog&) = delete;
  VoteLog& operator=(const VoteLog&) = delete;

  VoteAck append(const VoteRecord& vote);
  std::size_t size() const;
  void close();

  static std::vector<VoteRecord> read_all(const std::filesystem::path& path);

 private:
  using Key = std::tuple<std::string, ChunkId, VoteLabel>;

  std::filesystem::path path_;
  mutable std::mutex mu_;
  int fd_ = -1;
  std::set<Key> keys_;
  std::size_t records_ = 0;
};

/// Bounded FIFO of recently issued query ids.
class QueryRegistry {
 public:
  explicit QueryRegistry(std::size_t capacity = 100'000) : capacity_(capacity) {}

  void add(const std::string& query_id);
  bool contains(const std::string& query_id) const;
  std::size_t size() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<std::string> order_;
  std::unordered_set<std::string> ids_;
};

}  // namespace vecserve
