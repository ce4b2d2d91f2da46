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

// Roles answer the letter named by their id's position; aggregators repeat
// the last item they saw.
ScriptedPort puppet() {
  return ScriptedPort([](const CompletionRequest& r, int) -> std::string {
    switch (r.tag) {
      case CallTag::kRole: return "I pick " + std::string(1, static_cast<char>('A' + (r.context.role_id.back() - 'a') % 4));
      case CallTag::kAggregator: return "State: " + r.context.items.back().second;
      case CallTag::kDecision: return "C";
      default: return "?";
    }
  });
}

TEST(Compose, SubstitutesPlaceholdersOnce) {
  RolePrompt p{"a", "Q={question} O={options} S={state} {question}", 0, std::nullopt};
  auto x = make_instance("q", OptionLabel::kA, "why {state}?");
  const auto out = compose_prompt(p, x, {1, "prev"});
  EXPECT_EQ(out, "Q=why {state}? O=A. alpha\nB. beta\nC. gamma\nD. delta S=prev why {state}?");
}

TEST(Compose, LeavesNonIdentifierBracesAlone) {
  RolePrompt p{"a", "json {\"k\": 1} {} {question}", 0, std::nullopt};
  EXPECT_EQ(compose_prompt(p, make_instance("q", OptionLabel::kA, "Q"), initial_state()), "json {\"k\": 1} {} Q");
}

TEST(Compose, UnknownPlaceholderIsAConfigError) {
  RolePrompt p{"a", "{question} {mood}", 0, std::nullopt};
  try {
    compose_prompt(p, make_instance("q", OptionLabel::kA), initial_state());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownPlaceholder);
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Compose, TemplateWithoutQuestionGetsTaskAppended) {
  RolePrompt p{"a", "You are careful.", 0, std::nullopt};
  const auto out = compose_prompt(p, make_instance("q", OptionLabel::kA, "Q?"), initial_state());
  EXPECT_EQ(out.rfind("You are careful.", 0), 0u);
  EXPECT_NE(out.find("Q?"), std::string::npos);
  EXPECT_NE(out.find("D. delta"), std::string::npos);
  EXPECT_NE(out.find("(no prior state)"), std::string::npos);
}

TEST(Trajectory, ShapeMatchesTopologyForRandomSizes) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 5);
    const int rounds = 1 + static_cast<int>(gen() % 4);
    SystemTopology topo;
    for (int i = 0; i < n; ++i) topo.role_ids.push_back(std::string("r") + static_cast<char>('a' + i));
    topo.num_rounds = rounds;
    auto port = puppet();
    const auto traj = run_trajectory(make_instance("q", OptionLabel::kB), topo, default_prompt_set(topo), port);
    ASSERT_EQ(static_cast<int>(traj.transcripts.size()), rounds);
    ASSERT_EQ(static_cast<int>(traj.states.size()), rounds);
    for (int t = 0; t < rounds; ++t) {
      EXPECT_EQ(traj.transcripts[t].round_index, t + 1);
      EXPECT_EQ(traj.states[t].round_index, t + 1);
      ASSERT_EQ(static_cast<int>(traj.transcripts[t].utterances.size()), n);
      for (int i = 0; i < n; ++i) EXPECT_EQ(traj.transcripts[t].utterances[i].role_id, topo.role_ids[i]);
    }
    EXPECT_EQ(port.calls(), static_cast<std::size_t>(rounds * (n + 1)));
  }
}

TEST(Trajectory, RolesSeeOnlyThePreviousState) {
  const SystemTopology topo{{"a", "b"}, 2};
  auto port = puppet();
  run_trajectory(make_instance("q", OptionLabel::kB), topo, default_prompt_set(topo), port);
  const auto seen = port.seen();
  // round 1: a, b, agg; round 2: a, b, agg
  EXPECT_NE(seen[0].user_text.find("(no prior state)"), std::string::npos);
  EXPECT_EQ(seen[1].user_text.find("I pick A"), std::string::npos);
  EXPECT_NE(seen[3].user_text.find("State: I pick B"), std::string::npos);
  EXPECT_EQ(seen[3].user_text.find("(no prior state)"), std::string::npos);
  EXPECT_EQ(seen[2].context.items.size(), 2u);
}

TEST(Trajectory, ExtractDecisionScoresTheFinalState) {
  const SystemTopology topo{{"a", "b"}, 1};
  auto port = puppet();
  const auto traj = run_trajectory(make_instance("q", OptionLabel::kB), topo, default_prompt_set(topo), port);
  EXPECT_EQ(traj.final_answer, OptionLabel::kB);
  EXPECT_EQ(traj.score, 1);
}

TEST(Trajectory, ModelDecisionUsesTerminalCall) {
  const SystemTopology topo{{"a"}, 1};
  auto port = puppet();
  ProtocolOptions o;
  o.decision = DecisionMode::kModel;
  const auto traj = run_trajectory(make_instance("q", OptionLabel::kB), topo, default_prompt_set(topo), port, o);
  EXPECT_EQ(traj.final_answer, OptionLabel::kC);
  EXPECT_EQ(traj.score, 0);
  EXPECT_EQ(port.seen().back().tag, CallTag::kDecision);
}

TEST(Trajectory, RoleFailureAbortsWithPartialTrajectory) {
  const SystemTopology topo{{"a", "b"}, 2};
  ScriptedPort port([](const CompletionRequest& r, int) -> std::string {
    if (r.tag == CallTag::kRole && r.context.round_index == 2 && r.context.role_id == "b") {
      throw Error(ErrorCode::kNetworkFailure, "down");
    }
    return r.tag == CallTag::kRole ? "A" : "A";
  });
  try {
    run_trajectory(make_instance("q", OptionLabel::kA), topo, default_prompt_set(topo), port);
    FAIL();
  } catch (const TrajectoryAborted& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRoundIncomplete);
    EXPECT_EQ(e.partial().states.size(), 1u);
  }
}

TEST(Round, PreconditionsAreChecked) {
  const SystemTopology topo{{"a"}, 2};
  auto port = puppet();
  const auto prompts = default_prompt_set(topo);
  const auto x = make_instance("q", OptionLabel::kA);
  EXPECT_THROW(run_round(topo, x, initial_state(), 3, prompts, port), Error);
  EXPECT_THROW(run_round(topo, x, initial_state(), 2, prompts, port), Error);
  EXPECT_THROW(aggregate({1, {}}, prompts.aggregator(1), initial_state(), x, port), Error);
  EXPECT_THROW(aggregate({1, {{"a", 1, "A"}}}, prompts.aggregator(2), initial_state(), x, port), Error);
  EXPECT_THROW(finalize(x, {1, "A"}, 2), Error);
  EXPECT_EQ(finalize(x, {2, "maybe D"}, 2), OptionLabel::kD);
}

TEST(PromptSet, ValidationCatchesShapeErrors) {
  const SystemTopology topo{{"a", "b"}, 2};
  auto p = default_prompt_set(topo);
  EXPECT_NO_THROW(p.validate(topo));
  auto missing = p;
  missing.roles.erase("b");
  EXPECT_THROW(missing.validate(topo), Error);
  auto short_psi = p;
  short_psi.aggregators.pop_back();
  EXPECT_THROW(short_psi.validate(topo), Error);
  auto swapped = p;
  std::swap(swapped.aggregators[0], swapped.aggregators[1]);
  EXPECT_THROW(swapped.validate(topo), Error);
  EXPECT_THROW((SystemTopology{{}, 1}.validate()), Error);
  EXPECT_THROW((SystemTopology{{"a", "a"}, 1}.validate()), Error);
  EXPECT_THROW((SystemTopology{{"a"}, 0}.validate()), Error);
}

TEST(Json, PromptSetAndTrajectoryRoundTrip) {
  const SystemTopology topo{{"a", "b"}, 2};
  auto p = default_prompt_set(topo);
  p.roles.at("a") = {"a", "v1 {question}", 1, 0};
  EXPECT_EQ(prompt_set_from_json(to_json(p)), p);
  auto port = puppet();
  const auto traj = run_trajectory(make_instance("q", OptionLabel::kB), topo, p, port);
  EXPECT_EQ(trajectory_from_json(to_json(traj)), traj);
}

}  // namespace
}  // namespace creditloom
