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

#include <string_view>

#include "creditloom/errors.hpp"
#include "creditloom/labels.hpp"

namespace creditloom {

namespace detail {
// ASCII letters and digits. Bytes outside ASCII count as separators.
constexpr bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
}  // namespace detail

// First A/B/C/D character whose neighbours are both non-alphanumeric; string
// boundaries count as non-alphanumeric. Total: returns kInvalid when nothing
// qualifies.
constexpr OptionLabel extract_answer(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < 'A' || c > 'D') continue;
    const bool left_ok = i == 0 || !detail::is_ascii_alnum(text[i - 1]);
    const bool right_ok = i + 1 == text.size() || !detail::is_ascii_alnum(text[i + 1]);
    if (left_ok && right_ok) return static_cast<OptionLabel>(c - 'A');
  }
  return OptionLabel::kInvalid;
}

// 1 iff pred equals gold. An Invalid prediction always scores 0.
inline int score_exact(OptionLabel pred, OptionLabel gold) {
  if (!is_valid(gold)) throw Error(ErrorCode::kGoldInvalid, "gold label must be one of A-D");
  return pred == gold ? 1 : 0;
}

}  // namespace creditloom
