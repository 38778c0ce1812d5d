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

#include "vflrps/error.hpp"

#include <array>
#include <utility>

namespace vflrps {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 16> kNames{{
    {ErrorCode::kInvalidInput, "InvalidInput"},
    {ErrorCode::kConstantFeature, "ConstantFeature"},
    {ErrorCode::kInvalidSession, "InvalidSession"},
    {ErrorCode::kProtocolViolation, "ProtocolViolation"},
    {ErrorCode::kSessionAborted, "SessionAborted"},
    {ErrorCode::kConnectionLost, "ConnectionLost"},
    {ErrorCode::kFrameTooLarge, "FrameTooLarge"},
    {ErrorCode::kDecodeError, "DecodeError"},
    {ErrorCode::kBindFailure, "BindFailure"},
    {ErrorCode::kAlignmentError, "AlignmentError"},
    {ErrorCode::kInvalidConfig, "InvalidConfig"},
    {ErrorCode::kDiverged, "DivergedError"},
    {ErrorCode::kMissingTarget, "MissingTarget"},
    {ErrorCode::kNonNumericColumn, "NonNumericColumn"},
    {ErrorCode::kEmptyAfterFiltering, "EmptyAfterFiltering"},
    {ErrorCode::kIoError, "IoError"},
}};

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

ErrorCode error_code_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::kProtocolViolation;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidInput:
    case ErrorCode::kMissingTarget:
    case ErrorCode::kNonNumericColumn:
    case ErrorCode::kEmptyAfterFiltering:
    case ErrorCode::kIoError:
      return true;
    default:
      return false;
  }
}

}  // namespace vflrps
