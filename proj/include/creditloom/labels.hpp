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

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace creditloom {

enum class OptionLabel { kA, kB, kC, kD, kInvalid };

inline constexpr std::array<OptionLabel, 4> kValidOptions = {
    OptionLabel::kA, OptionLabel::kB, OptionLabel::kC, OptionLabel::kD};

inline bool is_valid(OptionLabel label) { return label != OptionLabel::kInvalid; }

inline char option_char(OptionLabel label) {
  switch (label) {
    case OptionLabel::kA: return 'A';
    case OptionLabel::kB: return 'B';
    case OptionLabel::kC: return 'C';
    case OptionLabel::kD: return 'D';
    case OptionLabel::kInvalid: break;
  }
  return '?';
}

inline std::string to_string(OptionLabel label) {
  return is_valid(label) ? std::string(1, option_char(label)) : std::string("Invalid");
}

inline std::optional<OptionLabel> option_from_char(char c) {
  switch (c) {
    case 'A': return OptionLabel::kA;
    case 'B': return OptionLabel::kB;
    case 'C': return OptionLabel::kC;
    case 'D': return OptionLabel::kD;
    default: return std::nullopt;
  }
}

// Accepts "A".."D" and "Invalid".
inline std::optional<OptionLabel> parse_option_label(std::string_view s) {
  if (s.size() == 1) return option_from_char(s[0]);
  if (s == "Invalid") return OptionLabel::kInvalid;
  return std::nullopt;
}

enum class FailurePattern {
  kDomainMismatch,
  kKnowledgeDeficit,
  kMisinterpretQuestion,
  kIncompleteReasoning,
  kOvergeneralization,
  kMisalignedObjective,
  kInsufficientJustification,
  kRandomOrUngrounded,
  kNone,
};

inline constexpr std::array<FailurePattern, 9> kAllPatterns = {
    FailurePattern::kDomainMismatch,     FailurePattern::kKnowledgeDeficit,
    FailurePattern::kMisinterpretQuestion, FailurePattern::kIncompleteReasoning,
    FailurePattern::kOvergeneralization, FailurePattern::kMisalignedObjective,
    FailurePattern::kInsufficientJustification, FailurePattern::kRandomOrUngrounded,
    FailurePattern::kNone};

inline std::string_view to_string(FailurePattern p) {
  switch (p) {
    case FailurePattern::kDomainMismatch: return "DOMAIN_MISMATCH";
    case FailurePattern::kKnowledgeDeficit: return "KNOWLEDGE_DEFICIT";
    case FailurePattern::kMisinterpretQuestion: return "MISINTERPRET_QUESTION";
    case FailurePattern::kIncompleteReasoning: return "INCOMPLETE_REASONING";
    case FailurePattern::kOvergeneralization: return "OVERGENERALIZATION";
    case FailurePattern::kMisalignedObjective: return "MISALIGNED_OBJECTIVE";
    case FailurePattern::kInsufficientJustification: return "INSUFFICIENT_JUSTIFICATION";
    case FailurePattern::kRandomOrUngrounded: return "RANDOM_OR_UNGROUNDED";
    case FailurePattern::kNone: return "NONE";
  }
  return "NONE";
}

// Exact label match only; no new labels.
inline std::optional<FailurePattern> parse_failure_pattern(std::string_view s) {
  for (auto p : kAllPatterns) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

}  // namespace creditloom
