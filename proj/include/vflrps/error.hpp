// Copyright 2026 The vflrps Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace vflrps {

enum class ErrorCode {
  kInvalidInput,
  kConstantFeature,
  kInvalidSession,
  kProtocolViolation,
  kSessionAborted,
  kConnectionLost,
  kFrameTooLarge,
  kDecodeError,
  kBindFailure,
  kAlignmentError,
  kInvalidConfig,
  kDiverged,
  kMissingTarget,
  kNonNumericColumn,
  kEmptyAfterFiltering,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Parses the name produced by error_code_name; unknown names map to
// kProtocolViolation.
ErrorCode error_code_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Configuration problems map to exit status 2, everything else to 3.
bool is_config_error(ErrorCode code);

}  // namespace vflrps
