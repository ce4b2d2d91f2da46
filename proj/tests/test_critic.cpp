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

#include "support.hpp"

namespace creditloom {
namespace {

using testing::make_instance;
using testing::ScriptedPort;

ErrorCode parse_code(const std::string& text) {
  try {
    parse_eval_output(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kConfig;
}

TEST(ParseEval, CanonicalBulletForm) {
  const auto e = parse_eval_output(
      "- Final answer correctness: incorrect\n"
      "- Primary failure or risk pattern: KNOWLEDGE_DEFICIT\n"
      "- Brief explanation: Confused two drugs.\n"
      "- Score: 2");
  EXPECT_FALSE(e.correct);
  EXPECT_EQ(e.pattern, FailurePattern::kKnowledgeDeficit);
  EXPECT_EQ(e.explanation, "Confused two drugs.");
  EXPECT_EQ(e.score, 2);
}

TEST(ParseEval, ToleratesDecorationAndCase) {
  const auto e = parse_eval_output(
      "**Correctness**: Correct\n"
      "**Pattern**: `NONE`\n"
      "**Explanation**: fine\n"
      "**score:** 5\n");
  EXPECT_TRUE(e.correct);
  EXPECT_EQ(e.pattern, FailurePattern::kNone);
  EXPECT_EQ(e.score, 5);
}

TEST(ParseEval, RejectsBadFields) {
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: NONE\n"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: LAZY\nScore: 3"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: NONE\nScore: 6"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: NONE\nScore: -1"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: NONE\nScore: 4.5"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Pattern: NONE\nScore: 4"), ErrorCode::kCriticParseFailure);
  EXPECT_EQ(parse_code("Correctness: correct\nPattern: none\nScore: 4"), ErrorCode::kCriticParseFailure);
}

TEST(Repair, ForcesConsistency) {
  EXPECT_EQ(repair({true, FailurePattern::kKnowledgeDeficit, "", 4}).pattern, FailurePattern::kNone);
  EXPECT_EQ(repair({false, FailurePattern::kNone, "", 1}).pattern, FailurePattern::kRandomOrUngrounded);
  EXPECT_EQ(repair({false, FailurePattern::kDomainMismatch, "", 1}).pattern, FailurePattern::kDomainMismatch);
}

const char* kGood = "Correctness: incorrect\nPattern: OVERGENERALIZATION\nExplanation: too broad\nScore: 1";
const char* kInconsistent = "Correctness: correct\nPattern: KNOWLEDGE_DEFICIT\nExplanation: hm\nScore: 4";

TEST(EvaluateTurn, WellFormedVerdictNeedsOneCall) {
  ScriptedPort port([](const CompletionRequest&, int) { return std::string(kGood); });
  const PromptAssets assets;
  const auto r = evaluate_turn({"a", 2, "I think C"}, make_instance("q", OptionLabel::kB), port, assets);
  EXPECT_EQ(port.calls(), 1u);
  EXPECT_EQ(r.role_id, "a");
  EXPECT_EQ(r.round_index, 2);
  EXPECT_EQ(r.pattern, FailurePattern::kOvergeneralization);
  EXPECT_DOUBLE_EQ(r.q, 0.2);
  const auto req = port.seen()[0];
  EXPECT_EQ(req.tag, CallTag::kCritic);
  EXPECT_EQ(req.temperature, 0.0);
  EXPECT_EQ(req.system_text, assets.agent_turn_eval());
  EXPECT_NE(req.user_text.find("Gold correct answer: B"), std::string::npos);
}

TEST(EvaluateTurn, UnparseableVerdictIsRequeriedOnce) {
  ScriptedPort port([](const CompletionRequest&, int i) { return i == 0 ? std::string("???") : std::string(kGood); });
  const auto r = evaluate_turn({"a", 1, "x"}, make_instance("q", OptionLabel::kB), port, PromptAssets{});
  EXPECT_EQ(port.calls(), 2u);
  EXPECT_EQ(r.raw_score, 1);
  EXPECT_NE(port.seen()[1].user_text, port.seen()[0].user_text);
}

TEST(EvaluateTurn, TwoUnparseableRepliesFail) {
  ScriptedPort port([](const CompletionRequest&, int) { return std::string("???"); });
  try {
    evaluate_turn({"a", 1, "x"}, make_instance("q", OptionLabel::kB), port, PromptAssets{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCriticParseFailure);
  }
  EXPECT_EQ(port.calls(), 2u);
}

TEST(EvaluateTurn, PersistentInconsistencyIsRepaired) {
  ScriptedPort port([](const CompletionRequest&, int) { return std::string(kInconsistent); });
  const auto r = evaluate_turn({"a", 1, "x"}, make_instance("q", OptionLabel::kB), port, PromptAssets{});
  EXPECT_EQ(port.calls(), 2u);
  EXPECT_TRUE(r.correct);
  EXPECT_EQ(r.pattern, FailurePattern::kNone);
  EXPECT_DOUBLE_EQ(r.q, 0.8);
}

TEST(Judge, ParsesScoresForEveryRole) {
  const auto p = parse_judge_output("- a: 5\n* **b**: 2.5\nnoise line\nc: 0", {"a", "b", "c"}, 2);
  EXPECT_EQ(p.round_index, 2);
  EXPECT_DOUBLE_EQ(p.scores.at("a"), 1.0);
  EXPECT_DOUBLE_EQ(p.scores.at("b"), 0.5);
  EXPECT_DOUBLE_EQ(p.scores.at("c"), 0.0);
  EXPECT_THROW(parse_judge_output("a: 5", {"a", "b"}, 1), Error);
  EXPECT_THROW(parse_judge_output("a: 7", {"a"}, 1), Error);
}

TEST(Judge, OneCallPerRoundAndOneRequery) {
  const RoundTranscript tr{1, {{"a", 1, "A"}, {"b", 1, "B"}}};
  ScriptedPort port([](const CompletionRequest&, int i) { return i == 0 ? std::string("a: 4") : std::string("a: 4\nb: 1"); });
  const auto p = judge_round(tr, make_instance("q", OptionLabel::kA), port, PromptAssets{});
  EXPECT_EQ(port.calls(), 2u);
  EXPECT_DOUBLE_EQ(p.scores.at("b"), 0.2);
  EXPECT_EQ(port.seen()[0].tag, CallTag::kJudge);
}

TEST(Aggregation, BinaryAndCriticModes) {
  const auto x = make_instance("q", OptionLabel::kC);
  EXPECT_DOUBLE_EQ(evaluate_aggregation({1, "consensus is C"}, x).quality, 1.0);
  EXPECT_DOUBLE_EQ(evaluate_aggregation({1, "consensus is D"}, x).quality, 0.0);
  ScriptedPort port([](const CompletionRequest&, int) { return std::string("Score: 3"); });
  const PromptAssets assets;
  const auto v = evaluate_aggregation({2, "C"}, x, AggregationQualityMode::kCritic, &port, &assets);
  EXPECT_DOUBLE_EQ(v.quality, 0.6);
  EXPECT_EQ(v.agg_answer, OptionLabel::kC);
  EXPECT_THROW(evaluate_aggregation({2, "C"}, x, AggregationQualityMode::kCritic), Error);
}

TEST(Assets, ShippedFilesMatchBuiltins) {
  const auto dir = testing::source_dir() / "prompts" / "assets";
  for (const auto& a : kPromptAssets) {
    EXPECT_EQ(testing::slurp(dir / std::string(a.name)), a.builtin) << a.name;
  }
}

TEST(Assets, DirectoryOverridesBuiltins) {
  testing::TempDir dir;
  testing::spit(dir / "peer_judge.txt", "custom judge");
  const auto assets = PromptAssets::load(dir.path());
  EXPECT_EQ(assets.peer_judge(), "custom judge");
  EXPECT_EQ(assets.agent_turn_eval(), kAgentTurnEvalPrompt);
  EXPECT_EQ(assets.hashes().at("peer_judge.txt"), sha256_hex("custom judge"));
}

TEST(Assets, EvaluatorPromptListsEveryLabel) {
  for (auto p : kAllPatterns) {
    EXPECT_NE(kAgentTurnEvalPrompt.find(to_string(p)), std::string_view::npos) << to_string(p);
  }
}

}  // namespace
}  // namespace creditloom
