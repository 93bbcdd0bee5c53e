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

#include <chrono>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "vecserve/error.h"
#include "vecserve/vectors.h"

namespace vecserve {

enum class EncoderKind { kReference, kRemote };
enum class EncoderRole { kRetrieval, kRerank };

struct EncoderDescriptor {
  std::string name = "reference";
  uint32_t dim = 64;
  EncoderKind kind = EncoderKind::kReference;
  std::string endpoint;
  EncoderRole role = EncoderRole::kRetrieval;

  // Remote client tuning.
  std::chrono::milliseconds timeout{10000};
  uint32_t max_in_flight = 4;
  uint32_t retries = 2;

  void validate() const;
};

/// Raised by the remote encoder; carries enough context for callers to
/// decide whether to retry.
class RemoteEncoderError : public Error {
 public:
  RemoteEncoderError(const std::string& message, int http_status, uint32_t attempts, bool retryable)
      : Error(ErrorCode::kRemoteEncoder, message),
        http_status_(http_status),
        attempts_(attempts),
        retryable_(retryable) {}

  // 0 when no HTTP response was received.
  int http_status() const { return http_status_; }
  uint32_t attempts() const { return attempts_; }
  bool retryable() const { return retryable_; }

 private:
  int http_status_;
  uint32_t attempts_;
  bool retryable_;
};

/// enc(text) -> unit-norm vector. Implementations are stateless with
/// respect to the texts they encode and are safe for concurrent use.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual const EncoderDescriptor& descriptor() const = 0;
  std::size_t dim() const { return descriptor().dim; }

  /// One unit-norm row per text, in input order. Empty texts are rejected.
  virtual Matrix encode(const std::vector<std::string>& texts) const = 0;

  std::vector<float> encode_one(const std::string& text) const;
};

/// Character-trigram feature hashing with signed buckets, L2-normalised.
/// Texts are lower-cased (ASCII) and padded with one space on each side so
/// that short words still produce trigrams. Bucket and sign come from a
/// fixed 64-bit FNV-1a hash, so output is identical on every platform.
class ReferenceEncoder final : public Encoder {
 public:
  explicit ReferenceEncoder(EncoderDescriptor descriptor);
  explicit ReferenceEncoder(uint32_t dim = 64);

  const EncoderDescriptor& descriptor() const override { return descriptor_; }
  Matrix encode(const std::vector<std::string>& texts) const override;

  // Un-normalised feature vector; exposed for tests.
  std::vector<float> features(std::string_view text) const;

 private:
  EncoderDescriptor descriptor_;
};

/// Client for an external embedding service.
///
///   POST {endpoint}/embed  {"texts": [...]}  ->  {"vectors": [[...], ...], "dim": h}
///
/// Vectors returned by the service are re-normalised locally. In-flight
/// requests are bounded by `descriptor.max_in_flight`.
class RemoteEncoder final : public Encoder {
 public:
  explicit RemoteEncoder(EncoderDescriptor descriptor);
  ~RemoteEncoder() override;

  const EncoderDescriptor& descriptor() const override { return descriptor_; }
  Matrix encode(const std::vector<std::string>& texts) const override;

 private:
  EncoderDescriptor descriptor_;
  std::string scheme_host_port_;
  std::string base_path_;
  mutable std::counting_semaphore<1024> in_flight_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderDescriptor& descriptor);

std::string_view encoder_kind_name(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

}  // namespace vecserve
