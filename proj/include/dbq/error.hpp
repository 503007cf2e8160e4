// Copyright 2026 The dbq Authors.
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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dbq {

// Coarse failure classes. The service maps these onto HTTP status codes and
// the CLI onto exit codes, so keep the set small.
enum class ErrorCode {
  kInvalidArgument,  // caller passed something that violates a precondition
  kParse,            // malformed file or payload
  kNotFound,
  kConflict,
  kNotReady,
  kTimeout,
  kArtifact,         // missing or corrupt model bundle
  kNumeric,          // training diverged or produced non-finite values
  kInternal,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kNotReady: return "not_ready";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kArtifact: return "artifact_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kInternal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dbq
