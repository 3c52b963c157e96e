// Copyright 2026 The fbmine Authors.
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

#ifndef FBMINE_ERROR_HPP_
#define FBMINE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace fbmine {

// Every failure the library reports carries one of these codes. The CLI maps
// them onto exit codes and the annotation server onto HTTP statuses.
enum class ErrorCode {
  kInvalidArgument,
  kPosNegConflict,
  kLengthMismatch,
  kMalformedJson,
  kEmptyConversation,
  kUnknownRole,
  kIoError,
  kTimeout,
  kRateLimited,
  kProtocolError,
  kWindowOutOfRange,
  kUnparsableOutput,
  kCountMismatch,
  kUnknownPattern,
  kIdMismatch,
  kDegenerateDenominator,
  kEmptyInput,
  kZeroVariance,
  kInsufficientPopulation,
  kMissingVariant,
  kEmptyAfterExclusion,
  kConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPosNegConflict: return "PosNegConflict";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kMalformedJson: return "MalformedJson";
    case ErrorCode::kEmptyConversation: return "EmptyConversation";
    case ErrorCode::kUnknownRole: return "UnknownRole";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kWindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::kUnparsableOutput: return "UnparsableOutput";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kUnknownPattern: return "UnknownPattern";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kInsufficientPopulation: return "InsufficientPopulation";
    case ErrorCode::kMissingVariant: return "MissingVariant";
    case ErrorCode::kEmptyAfterExclusion: return "EmptyAfterExclusion";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when a model service returns something we cannot interpret. The raw
// body is kept so it can be written to a skip ledger.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& message, std::string raw_body)
      : Error(ErrorCode::kProtocolError, message), raw_body_(std::move(raw_body)) {}

  const std::string& raw_body() const noexcept { return raw_body_; }

 private:
  std::string raw_body_;
};

class UnparsableOutput : public Error {
 public:
  UnparsableOutput(const std::string& message, std::string raw)
      : Error(ErrorCode::kUnparsableOutput, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fbmine

#endif  // FBMINE_ERROR_HPP_
