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
#include <optional>

#include "vecserve/corpus.h"
#include "vecserve/embed.h"

namespace vecserve {

struct EmbedJobConfig {
  std::size_t batch_size = 4096;
  // Stop after this many newly encoded batches; the job can be resumed.
  std::optional<std::size_t> max_batches;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct EmbedJobReport {
  std::size_t total_batches = 0;
  std::size_t resumed_from = 0;  // batches already on disk at start
  std::size_t encoded = 0;       // batches encoded by this run
  bool complete = false;
  uint64_t checksum = 0;  // xxh64 of the finished vector file, 0 while partial
};

/// Encodes every chunk of `store` into the vector file `out`, row i being
/// encode(chunk i). Progress is kept in `<out>.partial` and the manifest
/// `<out>.manifest.json`; each batch is fsync'd before the manifest
/// advances, so a rerun after an interruption skips finished batches and
/// produces the same bytes as an uninterrupted run. Rerunning a finished
/// job is a no-op. A partial file written with a different dimension,
/// batch size, encoder or chunk count raises DimensionError or ConfigError.
EmbedJobReport run_embed_job(const ChunkStore& store, const Encoder& encoder, const std::filesystem::path& out,
                             const EmbedJobConfig& config = {});

std::filesystem::path embed_manifest_path(const std::filesystem::path& out);
std::filesystem::path embed_partial_path(const std::filesystem::path& out);

uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace vecserve
