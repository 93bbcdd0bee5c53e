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
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "vecserve/io.h"

namespace vecserve {

using ChunkId = uint64_t;

struct CharSpan {
  uint64_t start = 0;
  uint64_t end = 0;

  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

/// A retrievable unit of text. `char_span` indexes bytes of the source
/// document's UTF-8 text.
struct Chunk {
  ChunkId id = 0;
  std::string doc_id;
  std::string text;
  std::string source;
  CharSpan char_span;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::string source;
};

struct ChunkingConfig {
  uint32_t window_tokens = 256;
  uint32_t overlap_tokens = 32;
  // Abort on the first malformed record instead of skipping it.
  bool strict = false;

  void validate() const;
};

/// Byte range of one whitespace-delimited token.
struct TokenSpan {
  std::size_t start;
  std::size_t end;
};

std::vector<TokenSpan> whitespace_tokens(std::string_view text);

/// Sliding windows over `token_count` tokens, as [first, last) token
/// index pairs. The final window ends exactly at `token_count`.
std::vector<std::pair<std::size_t, std::size_t>> chunk_windows(std::size_t token_count,
                                                               const ChunkingConfig& config);

/// Splits one document into chunks, assigning ids from `next_id` upward.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& config,
                                  ChunkId next_id);

std::string chunk_to_json(const Chunk& chunk);
Chunk chunk_from_json(std::string_view json);

/// Header of a persisted chunk store (`chunks.header.json`).
struct ChunkStoreHeader {
  static constexpr uint32_t kFormatVersion = 1;

  uint64_t count = 0;
  uint32_t window_tokens = 0;
  uint32_t overlap_tokens = 0;
  uint32_t format_version = kFormatVersion;
};

struct IngestReport {
  uint64_t documents = 0;
  uint64_t chunks = 0;
  uint64_t skipped_records = 0;
  std::vector<std::string> warnings;
};

/// Pull-style document source. Returns nullopt at end of stream; throws
/// MalformedRecord for records that cannot be parsed.
using DocumentSource = std::function<std::optional<Document>()>;

/// Reads JSON-lines documents (`doc_id`, `text`, `source`) from a stream.
class JsonlDocumentReader {
 public:
  explicit JsonlDocumentReader(std::istream& in) : in_(in) {}

  std::optional<Document> next();
  uint64_t line_number() const { return line_; }

 private:
  std::istream& in_;
  uint64_t line_ = 0;
};

/// Chunks every document from `source` and persists a chunk store under
/// `dir`. Malformed records are skipped with a warning, or abort the
/// ingest when `config.strict` is set. Throws EmptyCorpus when no chunk
/// was produced.
IngestReport ingest(const DocumentSource& source, const ChunkingConfig& config,
                    const std::filesystem::path& dir);

IngestReport ingest_jsonl(const std::filesystem::path& input, const ChunkingConfig& config,
                          const std::filesystem::path& dir);

/// Immutable, memory-mapped chunk store.
///
/// Files under the store directory:
///   chunks.header.json  {"count", "window_tokens", "overlap_tokens", "format_version"}
///   chunks.offsets      u64 little-endian byte offset of each record
///   chunks.payload      records: u32 byte length + UTF-8 JSON of the chunk
class ChunkStore {
 public:
  explicit ChunkStore(const std::filesystem::path& dir);

  uint64_t size() const { return header_.count; }
  const ChunkStoreHeader& header() const { return header_; }

  /// Throws NotFound for ids outside [0, size()).
  Chunk lookup(ChunkId id) const;
  std::string text(ChunkId id) const { return lookup(id).text; }

  static std::filesystem::path header_path(const std::filesystem::path& dir);
  static std::filesystem::path offsets_path(const std::filesystem::path& dir);
  static std::filesystem::path payload_path(const std::filesystem::path& dir);

 private:
  ChunkStoreHeader header_;
  MappedFile offsets_;
  MappedFile payload_;
};

}  // namespace vecserve
