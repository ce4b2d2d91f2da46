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

// Multi-agent, multi-round debate with a per-round aggregation bottleneck.
//
// Round t: every role i receives (x, S_{t-1}) through its shared prompt and
// produces an utterance; the round-t aggregator condenses the N utterances
// and S_{t-1} into S_t. After R rounds the terminal decision reads S_R.
// Roles never see each other's same-round utterances.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditloom/answer.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/prompt_assets.hpp"
#include "creditloom/task.hpp"

namespace creditloom {

// Content of S_0.
inline constexpr std::string_view kInitialStateText = "(no prior state)";

inline constexpr std::string_view kDefaultRoleSystemText =
    "You are one agent in a multi-round debate over a multiple-choice question. Follow your role "
    "instructions, reason carefully, and end with your answer as a single option letter (A, B, C, or D).";

struct SystemTopology {
  std::vector<std::string> role_ids;
  int num_rounds = 1;

  std::size_t num_roles() const { return role_ids.size(); }

  void validate() const {
    if (role_ids.empty()) throw Error(ErrorCode::kConfig, "topology needs at least one role");
    if (num_rounds < 1) throw Error(ErrorCode::kConfig, "topology needs at least one round");
    std::set<std::string> seen;
    for (const auto& id : role_ids) {
      if (id.empty()) throw Error(ErrorCode::kConfig, "role ids must be non-empty");
      if (!seen.insert(id).second) throw Error(ErrorCode::kConfig, "duplicate role id " + id);
    }
  }
};

struct RolePrompt {
  std::string role_id;
  std::string text;
  int version = 0;
  std::optional<int> parent_version;

  bool operator==(const RolePrompt&) const = default;
};

struct AggregatorPrompt {
  int round_index = 1;
  std::string text;
  int version = 0;
  std::optional<int> parent_version;

  bool operator==(const AggregatorPrompt&) const = default;
};

// Both optimization blocks: Phi (one shared prompt per role, used in every
// round) and Psi (one aggregator prompt per round).
struct PromptSet {
  std::map<std::string, RolePrompt> roles;
  std::vector<AggregatorPrompt> aggregators;  // aggregators[t-1] is psi_t

  const AggregatorPrompt& aggregator(int round) const { return aggregators.at(static_cast<std::size_t>(round - 1)); }
  AggregatorPrompt& aggregator(int round) { return aggregators.at(static_cast<std::size_t>(round - 1)); }

  void validate(const SystemTopology& topology) const {
    if (roles.size() != topology.num_roles()) {
      throw Error(ErrorCode::kConfig, "expected one role prompt per role");
    }
    for (const auto& id : topology.role_ids) {
      auto it = roles.find(id);
      if (it == roles.end()) throw Error(ErrorCode::kConfig, "missing role prompt for " + id);
      if (it->second.text.empty()) throw Error(ErrorCode::kConfig, "empty role prompt for " + id);
    }
    if (aggregators.size() != static_cast<std::size_t>(topology.num_rounds)) {
      throw Error(ErrorCode::kConfig, "expected one aggregator prompt per round");
    }
    for (std::size_t i = 0; i < aggregators.size(); ++i) {
      if (aggregators[i].round_index != static_cast<int>(i) + 1) {
        throw Error(ErrorCode::kConfig, "aggregator prompts must be ordered by round");
      }
      if (aggregators[i].text.empty()) throw Error(ErrorCode::kConfig, "empty aggregator prompt");
    }
  }

  bool operator==(const PromptSet&) const = default;
};

struct SharedState {
  int round_index = 0;
  std::string text;

  bool operator==(const SharedState&) const = default;
};

inline SharedState initial_state() { return {0, std::string(kInitialStateText)}; }

struct Utterance {
  std::string role_id;
  int round_index = 1;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

struct RoundTranscript {
  int round_index = 1;
  std::vector<Utterance> utterances;

  bool operator==(const RoundTranscript&) const = default;
};

struct Trajectory {
  std::string instance_id;
  OptionLabel gold = OptionLabel::kA;
  std::vector<RoundTranscript> transcripts;
  std::vector<SharedState> states;  // S_1..S_R
  OptionLabel final_answer = OptionLabel::kInvalid;
  int score = 0;

  bool operator==(const Trajectory&) const = default;
};

enum class DecisionMode { kExtract, kModel };

struct ProtocolOptions {
  std::string role_system_text = std::string(kDefaultRoleSystemText);
  double role_temperature = kRoleTemperature;
  double aggregator_temperature = kEvaluatorTemperature;
  int max_tokens = 512;
  DecisionMode decision = DecisionMode::kExtract;
  std::string decision_prompt = std::string(kTerminalDecisionPrompt);
};

class RoundIncomplete : public Error {
 public:
  RoundIncomplete(std::string role_id, int round, const std::string& cause)
      : Error(ErrorCode::kRoundIncomplete,
              "role " + role_id + " failed in round " + std::to_string(round) + ": " + cause),
        role_id_(std::move(role_id)),
        round_(round) {}
  const std::string& role_id() const { return role_id_; }
  int round() const { return round_; }

 private:
  std::string role_id_;
  int round_;
};

// Raised by run_trajectory; keeps the code of the underlying failure and
// the rounds completed before it.
class TrajectoryAborted : public Error {
 public:
  TrajectoryAborted(ErrorCode code, Trajectory partial, const std::string& cause)
      : Error(code, "trajectory " + partial.instance_id + " aborted after " +
                        std::to_string(partial.states.size()) + " round(s): " + cause),
        partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

// Substitutes {question}, {options} and {state} in a role template. Any
// other {identifier} is rejected. Substituted values are not re-scanned.
// A template without {question} gets the question, options and state
// appended in a fixed layout.
inline std::string compose_prompt(const RolePrompt& role, const TaskInstance& instance, const SharedState& prev_state) {
  const std::string& t = role.text;
  std::string out;
  out.reserve(t.size() + instance.question.size() + prev_state.text.size() + 256);
  auto is_ident = [](char c, bool first) {
    return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (!first && c >= '0' && c <= '9');
  };
  bool saw_question = false;
  std::size_t i = 0;
  while (i < t.size()) {
    if (t[i] == '{') {
      std::size_t j = i + 1;
      while (j < t.size() && is_ident(t[j], j == i + 1)) ++j;
      if (j > i + 1 && j < t.size() && t[j] == '}') {
        const std::string_view name(t.data() + i + 1, j - i - 1);
        if (name == "question") {
          out += instance.question;
          saw_question = true;
        } else if (name == "options") {
          out += render_options(instance);
        } else if (name == "state") {
          out += prev_state.text;
        } else {
          throw Error(ErrorCode::kUnknownPlaceholder,
                      "role " + role.role_id + " template uses {" + std::string(name) + "}");
        }
        i = j + 1;
        continue;
      }
    }
    out += t[i++];
  }
  if (!saw_question) {
    out += "\n\nQuestion:\n" + instance.question + "\n\nOptions:\n" + render_options(instance) +
           "\n\nShared state from the previous round:\n" + prev_state.text;
  }
  return out;
}

inline RoundTranscript run_round(const SystemTopology& topology, const TaskInstance& instance,
                                 const SharedState& prev_state, int t, const PromptSet& prompts,
                                 CompletionPort& gateway, const ProtocolOptions& options = {}) {
  if (t < 1 || t > topology.num_rounds) {
    throw Error(ErrorCode::kPrecondition, "round index " + std::to_string(t) + " out of range");
  }
  if (prev_state.round_index != t - 1) {
    throw Error(ErrorCode::kPrecondition, "round " + std::to_string(t) + " must read S_" + std::to_string(t - 1));
  }
  RoundTranscript transcript{t, {}};
  transcript.utterances.reserve(topology.num_roles());
  for (const auto& role_id : topology.role_ids) {
    auto it = prompts.roles.find(role_id);
    if (it == prompts.roles.end()) throw Error(ErrorCode::kPrecondition, "no prompt for role " + role_id);
    CompletionRequest req;
    req.system_text = options.role_system_text;
    req.user_text = compose_prompt(it->second, instance, prev_state);
    req.temperature = options.role_temperature;
    req.max_tokens = options.max_tokens;
    req.tag = CallTag::kRole;
    req.context.instance_id = instance.id;
    req.context.role_id = role_id;
    req.context.round_index = t;
    try {
      transcript.utterances.push_back({role_id, t, gateway.complete(req)});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kBudgetExceeded) throw;
      throw RoundIncomplete(role_id, t, e.what());
    }
  }
  return transcript;
}

inline std::string render_transcript(const RoundTranscript& transcript) {
  std::string out;
  for (const auto& u : transcript.utterances) {
    out += "[" + u.role_id + "]\n" + u.text + "\n\n";
  }
  return out;
}

// S_t = f_t(U_t; psi_t). The aggregator sees the question, S_{t-1} and every
// utterance of the round verbatim.
inline SharedState aggregate(const RoundTranscript& transcript, const AggregatorPrompt& psi,
                             const SharedState& prev_state, const TaskInstance& instance,
                             CompletionPort& gateway, const ProtocolOptions& options = {}) {
  if (transcript.utterances.empty()) {
    throw Error(ErrorCode::kEmptyTranscript, "round " + std::to_string(transcript.round_index));
  }
  if (psi.round_index != transcript.round_index) {
    throw Error(ErrorCode::kPrecondition, "aggregator prompt for round " + std::to_string(psi.round_index) +
                                              " applied to round " + std::to_string(transcript.round_index));
  }
  const int t = transcript.round_index;
  CompletionRequest req;
  req.system_text = psi.text;
  req.user_text = "Question:\n" + instance.question + "\n\nOptions:\n" + render_options(instance) +
                  "\n\nPrevious shared state:\n" + prev_state.text + "\n\nAgent responses for round " +
                  std::to_string(t) + ":\n\n" + render_transcript(transcript) +
                  "Write the shared state for the next stage of the debate.";
  req.temperature = options.aggregator_temperature;
  req.max_tokens = options.max_tokens;
  req.tag = CallTag::kAggregator;
  req.context.instance_id = instance.id;
  req.context.round_index = t;
  for (const auto& u : transcript.utterances) req.context.items.emplace_back(u.role_id, u.text);
  try {
    return {t, gateway.complete(req)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBudgetExceeded) throw;
    throw Error(ErrorCode::kCompletionFailure, "aggregator of round " + std::to_string(t) + ": " + e.what());
  }
}

// Terminal decision J(x, S_R). Extraction mode never calls the gateway.
inline OptionLabel finalize(const TaskInstance& instance, const SharedState& final_state, int num_rounds,
                            CompletionPort* gateway = nullptr, const ProtocolOptions& options = {}) {
  if (final_state.round_index != num_rounds) {
    throw Error(ErrorCode::kPrecondition, "terminal decision must read S_R");
  }
  if (options.decision == DecisionMode::kExtract) return extract_answer(final_state.text);
  if (gateway == nullptr) throw Error(ErrorCode::kConfig, "model decision mode needs a gateway");
  CompletionRequest req;
  req.system_text = options.decision_prompt;
  req.user_text = "Question:\n" + instance.question + "\n\nOptions:\n" + render_options(instance) +
                  "\n\nFinal shared state:\n" + final_state.text;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = 16;
  req.tag = CallTag::kDecision;
  req.context.instance_id = instance.id;
  req.context.round_index = num_rounds;
  req.context.subject = final_state.text;
  try {
    return extract_answer(gateway->complete(req));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBudgetExceeded) throw;
    throw Error(ErrorCode::kCompletionFailure, std::string("terminal decision: ") + e.what());
  }
}

inline Trajectory run_trajectory(const TaskInstance& instance, const SystemTopology& topology,
                                 const PromptSet& prompts, CompletionPort& gateway,
                                 const ProtocolOptions& options = {}) {
  prompts.validate(topology);
  Trajectory traj;
  traj.instance_id = instance.id;
  traj.gold = instance.gold;
  SharedState state = initial_state();
  try {
    for (int t = 1; t <= topology.num_rounds; ++t) {
      RoundTranscript transcript = run_round(topology, instance, state, t, prompts, gateway, options);
      SharedState next = aggregate(transcript, prompts.aggregator(t), state, instance, gateway, options);
      traj.transcripts.push_back(std::move(transcript));
      traj.states.push_back(next);
      state = std::move(next);
    }
    traj.final_answer = finalize(instance, state, topology.num_rounds, &gateway, options);
  } catch (const Error& e) {
    throw TrajectoryAborted(e.code(), std::move(traj), e.what());
  }
  traj.score = score_exact(traj.final_answer, instance.gold);
  return traj;
}

// ---- JSON forms -------------------------------------------------------------

inline nlohmann::json to_json(const RolePrompt& p) {
  nlohmann::json j = {{"role_id", p.role_id}, {"text", p.text}, {"version", p.version}};
  j["parent_version"] = p.parent_version ? nlohmann::json(*p.parent_version) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const AggregatorPrompt& p) {
  nlohmann::json j = {{"round", p.round_index}, {"text", p.text}, {"version", p.version}};
  j["parent_version"] = p.parent_version ? nlohmann::json(*p.parent_version) : nlohmann::json(nullptr);
  return j;
}

inline std::optional<int> optional_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<int>();
}

inline RolePrompt role_prompt_from_json(const nlohmann::json& j) {
  return {j.at("role_id").get<std::string>(), j.at("text").get<std::string>(), j.at("version").get<int>(),
          optional_int(j, "parent_version")};
}

inline AggregatorPrompt aggregator_prompt_from_json(const nlohmann::json& j) {
  return {j.at("round").get<int>(), j.at("text").get<std::string>(), j.at("version").get<int>(),
          optional_int(j, "parent_version")};
}

// Serialized Phi block; byte-stable for identical prompts.
inline std::string serialize_roles(const PromptSet& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [id, rp] : p.roles) j.push_back(to_json(rp));
  return j.dump();
}

// Serialized Psi block.
inline std::string serialize_aggregators(const PromptSet& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& ap : p.aggregators) j.push_back(to_json(ap));
  return j.dump();
}

inline nlohmann::json to_json(const PromptSet& p) {
  return {{"roles", nlohmann::json::parse(serialize_roles(p))},
          {"aggregators", nlohmann::json::parse(serialize_aggregators(p))}};
}

inline PromptSet prompt_set_from_json(const nlohmann::json& j) {
  PromptSet p;
  for (const auto& r : j.at("roles")) {
    auto rp = role_prompt_from_json(r);
    p.roles.emplace(rp.role_id, std::move(rp));
  }
  for (const auto& a : j.at("aggregators")) p.aggregators.push_back(aggregator_prompt_from_json(a));
  return p;
}

inline nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json rounds = nlohmann::json::array();
  for (std::size_t r = 0; r < t.transcripts.size(); ++r) {
    nlohmann::json utts = nlohmann::json::array();
    for (const auto& u : t.transcripts[r].utterances) utts.push_back({{"role_id", u.role_id}, {"text", u.text}});
    rounds.push_back({{"round", t.transcripts[r].round_index},
                      {"utterances", std::move(utts)},
                      {"state", r < t.states.size() ? t.states[r].text : std::string()}});
  }
  return {{"instance_id", t.instance_id},
          {"gold", to_string(t.gold)},
          {"rounds", std::move(rounds)},
          {"final_answer", to_string(t.final_answer)},
          {"score", t.score}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory t;
  t.instance_id = j.at("instance_id").get<std::string>();
  auto gold = parse_option_label(j.at("gold").get<std::string>());
  auto fin = parse_option_label(j.at("final_answer").get<std::string>());
  if (!gold || !fin) throw Error(ErrorCode::kSchemaMismatch, "bad option label in trajectory");
  t.gold = *gold;
  t.final_answer = *fin;
  t.score = j.at("score").get<int>();
  for (const auto& r : j.at("rounds")) {
    RoundTranscript rt{r.at("round").get<int>(), {}};
    for (const auto& u : r.at("utterances")) {
      rt.utterances.push_back({u.at("role_id").get<std::string>(), rt.round_index, u.at("text").get<std::string>()});
    }
    t.states.push_back({rt.round_index, r.at("state").get<std::string>()});
    t.transcripts.push_back(std::move(rt));
  }
  return t;
}

}  // namespace creditloom
