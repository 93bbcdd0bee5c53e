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

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>

#include "vecserve/checksum.h"
#include "vecserve/error.h"

namespace vecserve {

/// Read-only memory mapping of a whole file. Pages are faulted in on
/// access, so a mapping of a large index costs no resident memory until
/// nodes are actually read.
class MappedFile {
 public:
  MappedFile() = default;
  explicit MappedFile(const std::filesystem::path& path);
  ~MappedFile();

  MappedFile(const MappedFile&) = delete;
  MappedFile& operator=(const MappedFile&) = delete;
  MappedFile(MappedFile&& other) noexcept;
  MappedFile& operator=(MappedFile&& other) noexcept;

  std::span<const std::byte> bytes() const { return {data_, size_}; }
  const std::byte* data() const { return data_; }
  std::size_t size() const { return size_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void reset() noexcept;

  std::filesystem::path path_;
  const std::byte* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Sequential little-endian writer with an optional running checksum.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void write(const T& value) {
    write_bytes(&value, sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void write_span(std::span<const T> values) {
    write_bytes(values.data(), values.size_bytes());
  }

  void write_bytes(const void* data, std::size_t size);

  void start_checksum() {
    hashing_ = true;
    hash_ = Xxh64();
  }
  uint64_t checksum() const { return hash_.digest(); }

  // Seek back and patch a previously reserved field.
  void patch(std::size_t offset, const void* data, std::size_t size);
  std::size_t position() const { return position_; }

  // Flush, fsync and close.
  void finish();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t position_ = 0;
  bool hashing_ = false;
  Xxh64 hash_;
};

/// Bounds-checked cursor over a byte span. Running off the end raises
/// CorruptIndex, since every reader of this type is parsing a file.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T read() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }

  std::span<const std::byte> take(std::size_t size);
  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t offset_ = 0;
};

void fsync_path(const std::filesystem::path& path);

// Write to a sibling temp file, fsync, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace vecserve
