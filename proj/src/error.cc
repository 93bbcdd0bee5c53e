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
#include "vecserve/error.h"

namespace vecserve {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
    case ErrorCode::kConfig:
      return "ConfigError";
    case ErrorCode::kEmptyCorpus:
      return "EmptyCorpus";
    case ErrorCode::kMalformedRecord:
      return "MalformedRecord";
    case ErrorCode::kNotFound:
      return "NotFound";
    case ErrorCode::kDimension:
      return "DimensionError";
    case ErrorCode::kZeroVector:
      return "ZeroVector";
    case ErrorCode::kRemoteEncoder:
      return "RemoteEncoderError";
    case ErrorCode::kDuplicateId:
      return "DuplicateId";
    case ErrorCode::kBuildResource:
      return "BuildResourceError";
    case ErrorCode::kCorruptIndex:
      return "CorruptIndex";
    case ErrorCode::kVersion:
      return "VersionError";
    case ErrorCode::kIo:
      return "IoError";
    case ErrorCode::kModeUnavailable:
      return "ModeUnavailable";
    case ErrorCode::kRerankUnavailable:
      return "RerankUnavailable";
  }
  return "Unknown";
}

}  // namespace vecserve
