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
#include "vecserve/corpus.h"

#include <fstream>
#include <nlohmann/json.hpp>

namespace vecserve {

using json = nlohmann::json;

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

void ChunkingConfig::validate() const {
  if (window_tokens < 1) throw Error(ErrorCode::kConfig, "window_tokens must be >= 1");
  if (overlap_tokens >= window_tokens) {
    throw Error(ErrorCode::kConfig, "overlap_tokens must be < window_tokens");
  }
}

std::vector<TokenSpan> whitespace_tokens(std::string_view text) {
  std::vector<TokenSpan> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    tokens.push_back({start, i});
  }
  return tokens;
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_windows(std::size_t token_count,
                                                               const ChunkingConfig& config) {
  config.validate();
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  const std::size_t step = config.window_tokens - config.overlap_tokens;
  for (std::size_t start = 0; start < token_count; start += step) {
    std::size_t end = std::min(token_count, start + config.window_tokens);
    windows.emplace_back(start, end);
    if (end == token_count) break;
  }
  return windows;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& config,
                                  ChunkId next_id) {
  auto tokens = whitespace_tokens(doc.text);
  std::vector<Chunk> chunks;
  for (auto [first, last] : chunk_windows(tokens.size(), config)) {
    Chunk chunk;
    chunk.id = next_id++;
    chunk.doc_id = doc.doc_id;
    chunk.source = doc.source;
    chunk.char_span = {tokens[first].start, tokens[last - 1].end};
    chunk.text = doc.text.substr(chunk.char_span.start, chunk.char_span.end - chunk.char_span.start);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::string chunk_to_json(const Chunk& chunk) {
  json j = {{"id", chunk.id},
            {"doc_id", chunk.doc_id},
            {"text", chunk.text},
            {"source", chunk.source},
            {"char_span", {chunk.char_span.start, chunk.char_span.end}}};
  return j.dump();
}

Chunk chunk_from_json(std::string_view text) {
  json j = json::parse(text);
  Chunk chunk;
  chunk.id = j.at("id").get<ChunkId>();
  chunk.doc_id = j.at("doc_id").get<std::string>();
  chunk.text = j.at("text").get<std::string>();
  chunk.source = j.at("source").get<std::string>();
  const auto& span = j.at("char_span");
  chunk.char_span = {span.at(0).get<uint64_t>(), span.at(1).get<uint64_t>()};
  return chunk;
}

std::optional<Document> JsonlDocumentReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (whitespace_tokens(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedRecord,
                  "line " + std::to_string(line_) + ": invalid JSON (" + e.what() + ")");
    }
    Document doc;
    for (const char* field : {"doc_id", "text", "source"}) {
      if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
        throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_) +
                                                     ": missing string field '" + field + "'");
      }
    }
    doc.doc_id = j["doc_id"].get<std::string>();
    doc.text = j["text"].get<std::string>();
    doc.source = j["source"].get<std::string>();
    return doc;
  }
  return std::nullopt;
}

IngestReport ingest(const DocumentSource& source, const ChunkingConfig& config,
                    const std::filesystem::path& dir) {
  config.validate();
  std::filesystem::create_directories(dir);

  IngestReport report;
  BinaryWriter payload(ChunkStore::payload_path(dir));
  BinaryWriter offsets(ChunkStore::offsets_path(dir));

  auto skip = [&](const std::string& message) {
    if (config.strict) throw Error(ErrorCode::kMalformedRecord, message);
    ++report.skipped_records;
    report.warnings.push_back("skipped record: " + message);
  };

  while (true) {
    std::optional<Document> doc;
    try {
      doc = source();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kMalformedRecord) throw;
      skip(e.what());
      continue;
    }
    if (!doc) break;
    ++report.documents;
    auto chunks = chunk_document(*doc, config, report.chunks);
    if (chunks.empty()) {
      skip("document '" + doc->doc_id + "' has no non-whitespace text");
      continue;
    }
    for (const auto& chunk : chunks) {
      std::string record = chunk_to_json(chunk);
      offsets.write<uint64_t>(payload.position());
      payload.write<uint32_t>(static_cast<uint32_t>(record.size()));
      payload.write_bytes(record.data(), record.size());
    }
    report.chunks += chunks.size();
  }
  payload.finish();
  offsets.finish();

  if (report.chunks == 0) {
    throw Error(ErrorCode::kEmptyCorpus, "corpus produced no chunks");
  }

  json header = {{"count", report.chunks},
                 {"window_tokens", config.window_tokens},
                 {"overlap_tokens", config.overlap_tokens},
                 {"format_version", ChunkStoreHeader::kFormatVersion}};
  write_file_atomic(ChunkStore::header_path(dir), header.dump(2) + "\n");
  return report;
}

IngestReport ingest_jsonl(const std::filesystem::path& input, const ChunkingConfig& config,
                          const std::filesystem::path& dir) {
  std::ifstream in(input);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus " + input.string());
  JsonlDocumentReader reader(in);
  return ingest([&] { return reader.next(); }, config, dir);
}

std::filesystem::path ChunkStore::header_path(const std::filesystem::path& dir) {
  return dir / "chunks.header.json";
}
std::filesystem::path ChunkStore::offsets_path(const std::filesystem::path& dir) {
  return dir / "chunks.offsets";
}
std::filesystem::path ChunkStore::payload_path(const std::filesystem::path& dir) {
  return dir / "chunks.payload";
}

ChunkStore::ChunkStore(const std::filesystem::path& dir) {
  json header;
  try {
    header = json::parse(read_file(header_path(dir)));
    header_.count = header.at("count").get<uint64_t>();
    header_.window_tokens = header.at("window_tokens").get<uint32_t>();
    header_.overlap_tokens = header.at("overlap_tokens").get<uint32_t>();
    header_.format_version = header.at("format_version").get<uint32_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptIndex, "bad chunk store header in " + dir.string() + ": " + e.what());
  }
  if (header_.format_version != ChunkStoreHeader::kFormatVersion) {
    throw Error(ErrorCode::kVersion,
                "unsupported chunk store version " + std::to_string(header_.format_version));
  }
  offsets_ = MappedFile(offsets_path(dir));
  payload_ = MappedFile(payload_path(dir));
  if (offsets_.size() != header_.count * sizeof(uint64_t)) {
    throw Error(ErrorCode::kCorruptIndex, "chunk offsets file does not match count in " + dir.string());
  }
}

Chunk ChunkStore::lookup(ChunkId id) const {
  if (id >= header_.count) {
    throw Error(ErrorCode::kNotFound, "chunk id " + std::to_string(id) + " out of range [0, " +
                                          std::to_string(header_.count) + ")");
  }
  uint64_t offset;
  std::memcpy(&offset, offsets_.data() + id * sizeof(uint64_t), sizeof(offset));
  ByteReader reader(payload_.bytes());
  reader.take(offset);
  auto length = reader.read<uint32_t>();
  auto body = reader.take(length);
  return chunk_from_json({reinterpret_cast<const char*>(body.data()), body.size()});
}

}  // namespace vecserve
