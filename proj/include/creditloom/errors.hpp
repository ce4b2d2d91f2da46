// Copyright 2026 The Credit Loom Authors
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

namespace creditloom {

enum class ErrorCode {
  // configuration
  kConfig,
  kPrecondition,
  kUnknownPlaceholder,
  kRangeViolation,
  kUnknownRole,
  // gateway / model interaction
  kNetworkFailure,
  kCacheMiss,
  kBudgetExceeded,
  kBudgetExhausted,
  kCompletionFailure,
  kRoundIncomplete,
  kEmptyTranscript,
  kCriticParseFailure,
  kEmptyRewrite,
  // data
  kMalformedRow,
  kDuplicateId,
  kGoldInvalid,
  kSchemaMismatch,
  kCorruptLine,
  kEmptyLog,
  kIdMismatch,
  kMissingSnapshots,
  kTestExposure,
  kEmptyObservations,
  kNoFailures,
  kIo,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kPrecondition: return "PreconditionViolation";
    case ErrorCode::kUnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::kRangeViolation: return "RangeViolation";
    case ErrorCode::kUnknownRole: return "UnknownRole";
    case ErrorCode::kNetworkFailure: return "NetworkFailure";
    case ErrorCode::kCacheMiss: return "CacheMiss";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kCompletionFailure: return "CompletionFailure";
    case ErrorCode::kRoundIncomplete: return "RoundIncomplete";
    case ErrorCode::kEmptyTranscript: return "EmptyTranscript";
    case ErrorCode::kCriticParseFailure: return "CriticParseFailure";
    case ErrorCode::kEmptyRewrite: return "EmptyRewrite";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kGoldInvalid: return "GoldInvalid";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kCorruptLine: return "CorruptLine";
    case ErrorCode::kEmptyLog: return "EmptyLog";
    case ErrorCode::kIdMismatch: return "IdMismatch";
    case ErrorCode::kMissingSnapshots: return "MissingSnapshots";
    case ErrorCode::kTestExposure: return "TestExposure";
    case ErrorCode::kEmptyObservations: return "EmptyObservations";
    case ErrorCode::kNoFailures: return "NoFailures";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

// Process exit status for the CLI: 2 configuration, 3 gateway, 4 data.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kPrecondition:
    case ErrorCode::kUnknownPlaceholder:
    case ErrorCode::kRangeViolation:
    case ErrorCode::kUnknownRole:
      return 2;
    case ErrorCode::kNetworkFailure:
    case ErrorCode::kCacheMiss:
    case ErrorCode::kBudgetExceeded:
    case ErrorCode::kBudgetExhausted:
    case ErrorCode::kCompletionFailure:
    case ErrorCode::kRoundIncomplete:
    case ErrorCode::kEmptyTranscript:
    case ErrorCode::kCriticParseFailure:
    case ErrorCode::kEmptyRewrite:
      return 3;
    case ErrorCode::kMalformedRow:
    case ErrorCode::kDuplicateId:
    case ErrorCode::kGoldInvalid:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kCorruptLine:
    case ErrorCode::kEmptyLog:
    case ErrorCode::kIdMismatch:
    case ErrorCode::kMissingSnapshots:
    case ErrorCode::kTestExposure:
    case ErrorCode::kEmptyObservations:
    case ErrorCode::kNoFailures:
    case ErrorCode::kIo:
      return 4;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  int exit_code() const noexcept { return exit_code_for(code_); }

 private:
  ErrorCode code_;
};

// Gateway errors a caller may want to distinguish from parse/data failures.
inline bool is_gateway_error(ErrorCode code) { return exit_code_for(code) == 3; }

}  // namespace creditloom
