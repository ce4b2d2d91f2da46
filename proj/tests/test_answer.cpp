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

#include <gtest/gtest.h>

#include <cctype>
#include <random>

#include "support.hpp"

namespace creditloom {
namespace {

// Independent neighbour scan: pad with a sentinel and look at every window.
OptionLabel oracle_extract(const std::string& text) {
  const std::string padded = " " + text + " ";
  for (std::size_t i = 1; i + 1 < padded.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(padded[i]);
    if (c != 'A' && c != 'B' && c != 'C' && c != 'D') continue;
    const unsigned char l = static_cast<unsigned char>(padded[i - 1]);
    const unsigned char r = static_cast<unsigned char>(padded[i + 1]);
    const bool l_alnum = l < 128 && std::isalnum(l);
    const bool r_alnum = r < 128 && std::isalnum(r);
    if (!l_alnum && !r_alnum) return static_cast<OptionLabel>(c - 'A');
  }
  return OptionLabel::kInvalid;
}

TEST(ExtractAnswer, WorkedExamples) {
  EXPECT_EQ(extract_answer("The answer is B."), OptionLabel::kB);
  EXPECT_EQ(extract_answer("Both A and C tempt me, but C is right"), OptionLabel::kA);
  EXPECT_EQ(extract_answer("ABCD are the options; answer: D"), OptionLabel::kD);
  EXPECT_EQ(extract_answer("no letter here"), OptionLabel::kInvalid);
}

TEST(ExtractAnswer, Boundaries) {
  EXPECT_EQ(extract_answer(""), OptionLabel::kInvalid);
  EXPECT_EQ(extract_answer("C"), OptionLabel::kC);
  EXPECT_EQ(extract_answer("(A)"), OptionLabel::kA);
  EXPECT_EQ(extract_answer("A1 B"), OptionLabel::kB);
  EXPECT_EQ(extract_answer("_D_"), OptionLabel::kD);
  EXPECT_EQ(extract_answer("E F a b"), OptionLabel::kInvalid);
  EXPECT_EQ(extract_answer("answer:\nB"), OptionLabel::kB);
}

TEST(ExtractAnswer, NonAsciiNeighboursCountAsSeparators) {
  EXPECT_EQ(extract_answer("\xC3\xA9" "B\xC3\xA9"), OptionLabel::kB);
}

TEST(ExtractAnswer, IsConstexpr) {
  static_assert(extract_answer("pick C.") == OptionLabel::kC);
  static_assert(extract_answer("CAB") == OptionLabel::kInvalid);
}

TEST(ExtractAnswer, AgreesWithNeighbourScanOracleOnRandomStrings) {
  std::mt19937_64 gen(0xC0FFEE);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = testing::random_text(gen);
    ASSERT_EQ(extract_answer(s), oracle_extract(s)) << "input: [" << s << "]";
  }
}

TEST(ExtractAnswer, DeterministicAcrossCalls) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 200; ++i) {
    const std::string s = testing::random_text(gen);
    EXPECT_EQ(extract_answer(s), extract_answer(std::string(s)));
  }
}

TEST(ScoreExact, Cases) {
  EXPECT_EQ(score_exact(OptionLabel::kB, OptionLabel::kB), 1);
  EXPECT_EQ(score_exact(OptionLabel::kC, OptionLabel::kB), 0);
  EXPECT_EQ(score_exact(OptionLabel::kInvalid, OptionLabel::kB), 0);
}

TEST(ScoreExact, InvalidGoldIsADataError) {
  try {
    score_exact(OptionLabel::kA, OptionLabel::kInvalid);
    FAIL() << "expected GoldInvalid";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGoldInvalid);
    EXPECT_EQ(e.exit_code(), 4);
  }
}

TEST(Labels, RoundTrip) {
  for (auto l : kValidOptions) EXPECT_EQ(parse_option_label(to_string(l)), l);
  for (auto p : kAllPatterns) EXPECT_EQ(parse_failure_pattern(to_string(p)), p);
  EXPECT_FALSE(parse_failure_pattern("none").has_value());
  EXPECT_EQ(kAllPatterns.back(), FailurePattern::kNone);
}

TEST(Errors, ExitCodesByFamily) {
  EXPECT_EQ(exit_code_for(ErrorCode::kConfig), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kRangeViolation), 2);
  EXPECT_EQ(exit_code_for(ErrorCode::kCacheMiss), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kEmptyRewrite), 3);
  EXPECT_EQ(exit_code_for(ErrorCode::kTestExposure), 4);
  EXPECT_EQ(exit_code_for(ErrorCode::kMalformedRow), 4);
}

}  // namespace
}  // namespace creditloom
