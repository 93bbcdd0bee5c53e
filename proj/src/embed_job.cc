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
#include "vecserve/embed_job.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "vecserve/checksum.h"
#include "vecserve/io.h"

namespace vecserve {

using json = nlohmann::json;

namespace {

[[noreturn]] void throw_errno(const std::string& what, const std::filesystem::path& path) {
  throw Error(ErrorCode::kIo, what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const void* data, std::size_t size, const std::filesystem::path& path) {
  const char* p = static_cast<const char*>(data);
  while (size > 0) {
    ssize_t n = ::write(fd, p, size);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write failed", path);
    }
    p += n;
    size -= static_cast<std::size_t>(n);
  }
}

std::string header_bytes(uint64_t count, uint32_t dim) {
  std::string h(VectorFileHeader::kSize, '\0');
  std::memcpy(h.data(), VectorFileHeader::kMagic, 4);
  const uint32_t version = VectorFileHeader::kVersion;
  std::memcpy(h.data() + 4, &version, 4);
  std::memcpy(h.data() + 8, &count, 8);
  std::memcpy(h.data() + 16, &dim, 4);
  return h;
}

struct Manifest {
  uint64_t count = 0;
  uint32_t dim = 0;
  uint64_t batch_size = 0;
  std::string encoder;
  uint64_t completed_batches = 0;
  bool complete = false;
  uint64_t checksum = 0;

  json to_json() const {
    return {{"count", count},       {"dim", dim},
            {"batch_size", batch_size}, {"encoder", encoder},
            {"completed_batches", completed_batches}, {"complete", complete},
            {"checksum", checksum}};
  }

  static Manifest from_json(const json& j) {
    Manifest m;
    m.count = j.at("count").get<uint64_t>();
    m.dim = j.at("dim").get<uint32_t>();
    m.batch_size = j.at("batch_size").get<uint64_t>();
    m.encoder = j.at("encoder").get<std::string>();
    m.completed_batches = j.at("completed_batches").get<uint64_t>();
    m.complete = j.value("complete", false);
    m.checksum = j.value("checksum", uint64_t{0});
    return m;
  }
};

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  write_file_atomic(path, m.to_json().dump(2) + "\n");
}

}  // namespace

std::filesystem::path embed_manifest_path(const std::filesystem::path& out) {
  auto p = out;
  p += ".manifest.json";
  return p;
}

std::filesystem::path embed_partial_path(const std::filesystem::path& out) {
  auto p = out;
  p += ".partial";
  return p;
}

uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  Xxh64 h;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

EmbedJobReport run_embed_job(const ChunkStore& store, const Encoder& encoder, const std::filesystem::path& out,
                             const EmbedJobConfig& config) {
  if (config.batch_size == 0) throw Error(ErrorCode::kConfig, "embed batch size must be >= 1");
  const uint64_t count = store.size();
  const auto dim = static_cast<uint32_t>(encoder.dim());
  const std::size_t row_bytes = std::size_t{dim} * sizeof(float);
  const auto manifest_path = embed_manifest_path(out);
  const auto partial_path = embed_partial_path(out);

  EmbedJobReport report;
  report.total_batches = (count + config.batch_size - 1) / config.batch_size;

  Manifest m;
  bool resume = false;
  if (std::filesystem::exists(manifest_path)) {
    try {
      m = Manifest::from_json(json::parse(read_file(manifest_path)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kCorruptIndex, "unreadable embed manifest " + manifest_path.string() + ": " + e.what());
    }
    if (m.dim != dim) {
      throw Error(ErrorCode::kDimension, "existing embedding output has dim " + std::to_string(m.dim) +
                                             " but encoder '" + encoder.descriptor().name + "' produces dim " +
                                             std::to_string(dim) + "; remove " + manifest_path.string() +
                                             " to start over");
    }
    if (m.count != count || m.batch_size != config.batch_size || m.encoder != encoder.descriptor().name) {
      throw Error(ErrorCode::kConfig, "existing embedding manifest " + manifest_path.string() +
                                          " was written for a different store, batch size or encoder");
    }
    if (m.complete && std::filesystem::exists(out) && file_checksum(out) == m.checksum) {
      report.resumed_from = report.total_batches;
      report.complete = true;
      report.checksum = m.checksum;
      return report;
    }
    resume = !m.complete && std::filesystem::exists(partial_path);
  } else if (std::filesystem::exists(partial_path)) {
    auto header = read_vector_file_header(partial_path);
    if (header.dim != dim) {
      throw Error(ErrorCode::kDimension, "partial embedding file " + partial_path.string() + " has dim " +
                                             std::to_string(header.dim) + ", encoder produces " +
                                             std::to_string(dim));
    }
  }

  if (!resume) {
    m = Manifest{count, dim, config.batch_size, encoder.descriptor().name, 0, false, 0};
  } else {
    auto header = read_vector_file_header(partial_path);
    if (header.dim != dim || header.count != count) {
      throw Error(ErrorCode::kDimension, "partial embedding file " + partial_path.string() +
                                             " does not match the manifest");
    }
  }

  int fd = ::open(partial_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw_errno("cannot open", partial_path);
  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } closer{fd};

  // Anything past the last recorded batch is a torn write; drop it.
  const uint64_t done_rows = std::min<uint64_t>(m.completed_batches * config.batch_size, count);
  const off_t keep = static_cast<off_t>(VectorFileHeader::kSize + done_rows * row_bytes);
  if (::ftruncate(fd, keep) != 0) throw_errno("cannot truncate", partial_path);
  if (!resume) {
    const std::string header = header_bytes(count, dim);
    if (::pwrite(fd, header.data(), header.size(), 0) != static_cast<ssize_t>(header.size())) {
      throw_errno("cannot write header to", partial_path);
    }
  }
  if (::lseek(fd, keep, SEEK_SET) < 0) throw_errno("cannot seek", partial_path);
  report.resumed_from = m.completed_batches;

  for (std::size_t b = m.completed_batches; b < report.total_batches; ++b) {
    if (config.max_batches && report.encoded >= *config.max_batches) return report;
    const uint64_t first = b * config.batch_size;
    const uint64_t last = std::min<uint64_t>(first + config.batch_size, count);
    std::vector<std::string> texts;
    texts.reserve(last - first);
    for (uint64_t id = first; id < last; ++id) texts.push_back(store.text(id));
    Matrix vectors = encoder.encode(texts);
    if (vectors.dim() != dim || vectors.rows() != texts.size()) {
      throw Error(ErrorCode::kDimension, "encoder returned " + std::to_string(vectors.rows()) + "x" +
                                             std::to_string(vectors.dim()) + " for a batch of " +
                                             std::to_string(texts.size()));
    }
    write_all(fd, vectors.data(), vectors.values().size() * sizeof(float), partial_path);
    if (::fsync(fd) != 0) throw_errno("fsync failed on", partial_path);
    m.completed_batches = b + 1;
    save_manifest(manifest_path, m);
    ++report.encoded;
    if (config.progress) config.progress(b + 1, report.total_batches);
  }

  std::filesystem::rename(partial_path, out);
  m.complete = true;
  m.checksum = file_checksum(out);
  save_manifest(manifest_path, m);
  report.complete = true;
  report.checksum = m.checksum;
  return report;
}

}  // namespace vecserve
