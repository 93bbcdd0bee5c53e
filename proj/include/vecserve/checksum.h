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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace vecserve {

/// Streaming XXH64. Index files carry this digest of their body so that
/// truncation or bit rot is caught when the file is opened.
class Xxh64 {
 public:
  explicit Xxh64(uint64_t seed = 0);

  void update(std::span<const std::byte> data);
  void update(const void* data, std::size_t size) {
    update({static_cast<const std::byte*>(data), size});
  }
  uint64_t digest() const;

 private:
  uint64_t seed_;
  uint64_t total_len_ = 0;
  std::array<uint64_t, 4> acc_;
  std::array<std::byte, 32> buffer_{};
  std::size_t buffered_ = 0;
};

uint64_t xxh64(std::span<const std::byte> data, uint64_t seed = 0);

}  // namespace vecserve
