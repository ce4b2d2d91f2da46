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

// Verbalized block coordinate descent over the two prompt blocks.
//
// One step k:
//   Phase A  roll out the optimization split under (Phi_k, Psi_k), score every
//            role, rewrite the bottom-K roles            -> Phi_{k+1}
//   Phase B  roll out under (Phi_{k+1}, Psi_k), update the round credits,
//            rewrite the aggregators of weak rounds      -> Psi_{k+1}
//
// Each phase only ever edits its own block. A step is computed on a copy and
// handed back whole, so a failure mid-step leaves the caller's prompts as
// they were.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditloom/answer.hpp"
#include "creditloom/credit_ledger.hpp"
#include "creditloom/critic.hpp"
#include "creditloom/datastore.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/prompt_assets.hpp"
#include "creditloom/protocol.hpp"
#include "creditloom/task.hpp"

namespace creditloom {

// ---- types ------------------------------------------------------------------

struct TextualGradient {
  std::string target;  // role id, or "round<t>"
  std::string feedback_text;
  std::vector<std::string> evidence;
};

struct FailureGroup {
  FailurePattern pattern = FailurePattern::kRandomOrUngrounded;
  int count = 0;
  std::vector<std::string> representatives;  // at most 3
};

struct DiagnosisSummary {
  std::string role_id;
  std::vector<FailureGroup> groups;
  std::string summary_text;
};

struct HistoryRow {
  int iteration = 0;
  std::string phase;  // "A" or "B"
  std::vector<std::string> targets;
  double accuracy = 0.0;  // percent on the optimization split

  bool operator==(const HistoryRow&) const = default;
};

struct OptimizerState {
  int iteration = 0;
  PromptSet prompts;
  std::vector<HistoryRow> history;
  std::vector<LedgerSnapshot> snapshots;
  std::vector<TextualGradient> gradients;
};

enum class ReusePolicy { kAuto, kAlways, kNever };

inline std::string_view to_string(ReusePolicy p) {
  switch (p) {
    case ReusePolicy::kAuto: return "auto";
    case ReusePolicy::kAlways: return "always";
    case ReusePolicy::kNever: return "never";
  }
  return "auto";
}

inline ReusePolicy parse_reuse_policy(std::string_view s) {
  if (s == "auto") return ReusePolicy::kAuto;
  if (s == "always") return ReusePolicy::kAlways;
  if (s == "never") return ReusePolicy::kNever;
  throw Error(ErrorCode::kConfig, "unknown phase-B reuse policy '" + std::string(s) + "'");
}

struct OptimizerConfig {
  int k_max = 5;
  int patience = 2;
  double epsilon = 0.5;  // accuracy points
  ReusePolicy reuse = ReusePolicy::kAuto;
  int workers = 4;
  bool critic_all_rounds = false;  // score every round instead of the last one only
  std::size_t max_exemplars = 10;
  CreditConfig credit;
  ProtocolOptions protocol;
  CriticOptions critic;

  void validate() const {
    if (k_max < 0) throw Error(ErrorCode::kRangeViolation, "k_max must be >= 0");
    if (patience < 1) throw Error(ErrorCode::kRangeViolation, "patience must be >= 1");
    if (!(epsilon >= 0.0)) throw Error(ErrorCode::kRangeViolation, "epsilon must be >= 0");
    if (workers < 1) throw Error(ErrorCode::kRangeViolation, "workers must be >= 1");
    if (max_exemplars < 1) throw Error(ErrorCode::kRangeViolation, "max_exemplars must be >= 1");
    credit.validate();
  }
};

// ---- concurrency ------------------------------------------------------------

// Runs fn(0..n-1) on up to `workers` threads. Results keep index order; if
// several calls fail, the failure with the lowest index is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, int workers, Fn fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(n, 1));
  std::vector<std::thread> threads;
  for (std::size_t k = 1; k < count; ++k) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---- rollouts ---------------------------------------------------------------

struct StructuralSignals {
  std::vector<EvalRecord> evals;
  std::vector<PeerScores> peers;
};

struct Rollout {
  Trajectory trajectory;
  StructuralSignals signals;
};

inline std::vector<int> scored_rounds(int num_rounds, bool all_rounds) {
  std::vector<int> out;
  for (int t = all_rounds ? 1 : num_rounds; t <= num_rounds; ++t) out.push_back(t);
  return out;
}

// Critic verdicts and peer scores for the rounds that feed role credit.
inline StructuralSignals score_roles(const Trajectory& traj, const TaskInstance& instance, CompletionPort& gateway,
                                     const PromptAssets& assets, const OptimizerConfig& config) {
  StructuralSignals out;
  for (int t : scored_rounds(static_cast<int>(traj.transcripts.size()), config.critic_all_rounds)) {
    const auto& transcript = traj.transcripts.at(static_cast<std::size_t>(t - 1));
    for (const auto& u : transcript.utterances) {
      out.evals.push_back(evaluate_turn(u, instance, gateway, assets, config.critic));
    }
    out.peers.push_back(judge_round(transcript, instance, gateway, assets, config.critic));
  }
  return out;
}

inline std::vector<Rollout> rollout(const std::vector<TaskInstance>& instances, const SystemTopology& topology,
                                    const PromptSet& prompts, CompletionPort& gateway, const PromptAssets& assets,
                                    const OptimizerConfig& config, bool with_signals) {
  return parallel_map<Rollout>(instances.size(), config.workers, [&](std::size_t i) {
    Rollout r;
    r.trajectory = run_trajectory(instances[i], topology, prompts, gateway, config.protocol);
    if (with_signals) r.signals = score_roles(r.trajectory, instances[i], gateway, assets, config);
    return r;
  });
}

inline double accuracy_percent(const std::vector<Rollout>& rollouts) {
  if (rollouts.empty()) return 0.0;
  int correct = 0;
  for (const auto& r : rollouts) correct += r.trajectory.score;
  return 100.0 * correct / static_cast<double>(rollouts.size());
}

inline std::vector<RoundEvent> round_events(const Trajectory& traj) {
  std::vector<RoundEvent> out;
  for (std::size_t r = 0; r < traj.transcripts.size() && r < traj.states.size(); ++r) {
    const auto& transcript = traj.transcripts[r];
    RoundEvent e;
    e.instance_id = traj.instance_id;
    e.round_index = transcript.round_index;
    e.exemplar.instance_id = traj.instance_id;
    e.exemplar.gold = traj.gold;
    e.exemplar.agg_answer = extract_answer(traj.states[r].text);
    std::vector<OptionLabel> answers;
    for (const auto& u : transcript.utterances) {
      const auto a = extract_answer(u.text);
      answers.push_back(a);
      e.exemplar.agent_answers.emplace_back(u.role_id, a);
    }
    e.kind = classify_event(traj.gold, e.exemplar.agg_answer, answers);
    out.push_back(std::move(e));
  }
  return out;
}

// ---- diagnosis and rewrites -------------------------------------------------

// Failures grouped by pattern: most frequent first, ties in label order.
inline std::vector<FailureGroup> group_failures(const std::vector<EvalRecord>& records) {
  std::map<FailurePattern, FailureGroup> by;
  for (const auto& r : records) {
    if (r.pattern == FailurePattern::kNone) continue;
    auto& g = by[r.pattern];
    g.pattern = r.pattern;
    ++g.count;
    if (g.representatives.size() < 3 && !r.explanation.empty()) g.representatives.push_back(r.explanation);
  }
  std::vector<FailureGroup> out;
  for (auto p : kAllPatterns) {
    if (auto it = by.find(p); it != by.end()) out.push_back(it->second);
  }
  std::stable_sort(out.begin(), out.end(), [](const FailureGroup& a, const FailureGroup& b) { return a.count > b.count; });
  return out;
}

inline std::string render_failure_groups(const std::string& role_id, const std::vector<FailureGroup>& groups) {
  int total = 0;
  for (const auto& g : groups) total += g.count;
  std::string out = "Failure summary for agent " + role_id + " (" + std::to_string(total) + " failures):\n";
  for (const auto& g : groups) {
    out += "\nFailure type: " + std::string(to_string(g.pattern)) + "\nFrequency: " + std::to_string(g.count) +
           " of " + std::to_string(total) + "\nRepresentative explanations:\n";
    for (const auto& e : g.representatives) out += "- " + e + "\n";
  }
  return out;
}

inline std::string stripped(std::string_view s) { return std::string(detail::trim(s)); }

namespace detail {

inline constexpr std::string_view kEmptyReplyNote =
    "\n\nYour previous reply was empty. Output the rewritten text only.";

// Issues the rewrite and retries once on an empty completion.
inline std::string request_rewrite(CompletionRequest req, CompletionPort& gateway, const std::string& what) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string text = stripped(gateway.complete(req));
    if (!text.empty()) return text;
    req.user_text += kEmptyReplyNote;
  }
  throw Error(ErrorCode::kEmptyRewrite, what + ": empty rewrite after one retry");
}

}  // namespace detail

inline DiagnosisSummary summarize_failures(const std::string& role_id, const std::vector<EvalRecord>& records,
                                           CompletionPort& gateway, const PromptAssets& assets) {
  DiagnosisSummary d;
  d.role_id = role_id;
  d.groups = group_failures(records);
  if (d.groups.empty()) throw Error(ErrorCode::kNoFailures, "role " + role_id + " has no recorded failures");
  CompletionRequest req;
  req.system_text = assets.agent_diagnosis();
  req.user_text = render_failure_groups(role_id, d.groups);
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = 512;
  req.tag = CallTag::kDiagnosis;
  req.context.role_id = role_id;
  req.context.subject = req.user_text;
  d.summary_text = stripped(gateway.complete(req));
  if (d.summary_text.empty()) d.summary_text = req.user_text;
  return d;
}

inline TextualGradient role_gradient(const DiagnosisSummary& diagnosis, const std::vector<EvalRecord>& records) {
  TextualGradient g{diagnosis.role_id, diagnosis.summary_text, {}};
  for (const auto& r : records) {
    if (r.pattern != FailurePattern::kNone) g.evidence.push_back(r.instance_id + "#" + std::to_string(r.round_index));
  }
  return g;
}

inline RolePrompt role_opt(const RolePrompt& prompt, const DiagnosisSummary& diagnosis, CompletionPort& gateway,
                           const PromptAssets& assets) {
  if (diagnosis.role_id != prompt.role_id) {
    throw Error(ErrorCode::kPrecondition, "diagnosis for " + diagnosis.role_id + " applied to " + prompt.role_id);
  }
  CompletionRequest req;
  req.system_text = assets.role_prompt_optimize();
  req.user_text = "Original role prompt:\n" + prompt.text + "\n\nFailure summary:\n" + diagnosis.summary_text;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = 1024;
  req.tag = CallTag::kOptimizer;
  req.context.role_id = prompt.role_id;
  req.context.subject = prompt.text;
  return {prompt.role_id, detail::request_rewrite(req, gateway, "role " + prompt.role_id), prompt.version + 1,
          prompt.version};
}

inline TextualGradient round_gradient(int round, const std::vector<FailureExemplar>& buffer, std::size_t max_cases) {
  TextualGradient g{"round" + std::to_string(round), {}, {}};
  const std::size_t shown = std::min(buffer.size(), max_cases);
  g.feedback_text = std::to_string(buffer.size()) + " case(s) in round " + std::to_string(round) +
                    " where a correct agent answer was lost in aggregation";
  g.feedback_text += shown < buffer.size() ? " (first " + std::to_string(shown) + " shown):\n" : ":\n";
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const auto& e = buffer[i];
    g.evidence.push_back(e.instance_id);
    if (i >= shown) continue;
    std::string agents;
    for (const auto& [role, answer] : e.agent_answers) {
      agents += (agents.empty() ? "" : ", ") + role + "=" + to_string(answer);
    }
    g.feedback_text += "- case " + e.instance_id + ": correct answer " + to_string(e.gold) + "; agents answered " +
                       agents + "; aggregated state reported " + to_string(e.agg_answer) + "\n";
  }
  return g;
}

inline AggregatorPrompt agg_opt(const AggregatorPrompt& psi, const std::vector<FailureExemplar>& buffer,
                                CompletionPort& gateway, const PromptAssets& assets, std::size_t max_cases = 10) {
  if (buffer.empty()) throw Error(ErrorCode::kPrecondition, "no failure exemplars for round " + std::to_string(psi.round_index));
  const TextualGradient g = round_gradient(psi.round_index, buffer, max_cases);
  CompletionRequest req;
  req.system_text = assets.aggregator_optimize();
  req.user_text = "Current aggregator instruction:\n" + psi.text + "\n\nFailure cases:\n" + g.feedback_text;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = 1024;
  req.tag = CallTag::kOptimizer;
  req.context.round_index = psi.round_index;
  req.context.subject = psi.text;
  return {psi.round_index, detail::request_rewrite(req, gateway, "aggregator of round " + std::to_string(psi.round_index)),
          psi.version + 1, psi.version};
}

// ---- one BCD step -----------------------------------------------------------

struct BcdContext {
  const SystemTopology& topology;
  const std::vector<TaskInstance>& instances;  // optimization instances only
  const DatasetSplit& split;
  CompletionPort& gateway;
  const PromptAssets& assets;
  const OptimizerConfig& config;
  const PromptStore* store = nullptr;
  std::optional<std::filesystem::path> log_dir;
};

inline void require_optimization_instances(const BcdContext& ctx) {
  std::vector<std::string> ids;
  ids.reserve(ctx.instances.size());
  for (const auto& x : ctx.instances) ids.push_back(x.id);
  require_optimization_ids(ctx.split, ids);
}

inline void write_rollouts(const BcdContext& ctx, int iteration, const char* phase, const std::vector<Rollout>& rollouts) {
  if (!ctx.log_dir) return;
  const auto path = *ctx.log_dir / ("trajectories_k" + std::to_string(iteration) + "_" + phase + ".jsonl");
  std::filesystem::remove(path);
  std::vector<Trajectory> trajs;
  for (const auto& r : rollouts) trajs.push_back(r.trajectory);
  append_trajectories(path, trajs);
}

inline OptimizerState bcd_step(OptimizerState state, const BcdContext& ctx, CreditLedger& ledger) {
  require_optimization_instances(ctx);
  const auto& topo = ctx.topology;
  const auto& cfg = ctx.config;
  state.prompts.validate(topo);
  ledger.begin_epoch(topo.role_ids, topo.num_rounds);
  const int k = state.iteration;

  // Phase A: structural block.
  const std::string psi_before = serialize_aggregators(state.prompts);
  auto rollouts_a = rollout(ctx.instances, topo, state.prompts, ctx.gateway, ctx.assets, cfg, true);
  for (const auto& r : rollouts_a) {
    for (const auto& peer : r.signals.peers) {
      for (const auto& e : r.signals.evals) {
        if (e.round_index != peer.round_index) continue;
        ledger.add_role_observation(e.role_id, e.q, peer.scores.at(e.role_id));
        ledger.add_eval_record(e);
      }
    }
  }
  const auto selected_roles = ledger.weak_roles();
  PromptSet after_a = state.prompts;
  int role_edits = 0;
  for (const auto& id : selected_roles) {
    const auto& records = ledger.failures(id);
    if (records.empty()) continue;
    const auto diagnosis = summarize_failures(id, records, ctx.gateway, ctx.assets);
    state.gradients.push_back(role_gradient(diagnosis, records));
    after_a.roles.at(id) = role_opt(after_a.roles.at(id), diagnosis, ctx.gateway, ctx.assets);
    ++role_edits;
  }
  if (serialize_aggregators(after_a) != psi_before) {
    throw Error(ErrorCode::kPrecondition, "phase A modified the aggregator block");
  }
  state.history.push_back({k, "A", selected_roles, accuracy_percent(rollouts_a)});

  // Phase B: temporal block.
  const std::string phi_after_a = serialize_roles(after_a);
  const bool reuse = cfg.reuse == ReusePolicy::kAlways || (cfg.reuse == ReusePolicy::kAuto && role_edits == 0);
  std::vector<Rollout> rollouts_b =
      reuse ? rollouts_a : rollout(ctx.instances, topo, after_a, ctx.gateway, ctx.assets, cfg, false);
  std::vector<RoundEvent> events;
  for (const auto& r : rollouts_b) {
    auto e = round_events(r.trajectory);
    events.insert(events.end(), std::make_move_iterator(e.begin()), std::make_move_iterator(e.end()));
  }
  ledger.apply_round_events(std::move(events));
  state.snapshots.push_back(ledger.snapshot(k));
  const auto selected_rounds = ledger.weak_rounds();
  PromptSet after_b = after_a;
  std::vector<std::string> round_targets;
  for (int t : selected_rounds) {
    const auto& buffer = ledger.round_buffer(t);
    state.gradients.push_back(round_gradient(t, buffer, cfg.max_exemplars));
    after_b.aggregator(t) = agg_opt(after_b.aggregator(t), buffer, ctx.gateway, ctx.assets, cfg.max_exemplars);
    round_targets.push_back("round" + std::to_string(t));
  }
  if (serialize_roles(after_b) != phi_after_a) {
    throw Error(ErrorCode::kPrecondition, "phase B modified the role block");
  }
  for (int t : selected_rounds) ledger.clear_round_buffer(t);
  state.history.push_back({k, "B", round_targets, accuracy_percent(rollouts_b)});

  // Barrier: persist.
  if (ctx.store != nullptr) {
    for (const auto& id : selected_roles) {
      if (after_b.roles.at(id) != state.prompts.roles.at(id)) ctx.store->save(after_b.roles.at(id));
    }
    for (int t : selected_rounds) ctx.store->save(after_b.aggregator(t));
  }
  write_rollouts(ctx, k, "A", rollouts_a);
  write_rollouts(ctx, k, "B", rollouts_b);
  state.prompts = std::move(after_b);
  state.iteration = k + 1;
  return state;
}

// ---- full run ---------------------------------------------------------------

struct RunManifest {
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> asset_hashes;
  std::vector<std::uint64_t> seeds;
  std::string generator = std::string(kGeneratorId);
  std::vector<HistoryRow> history;
  std::vector<LedgerSnapshot> snapshots;
  std::map<std::string, int> prompt_versions;
  int iterations = 0;
  std::string stop_reason;
};

inline std::map<std::string, int> prompt_versions(const PromptSet& p) {
  std::map<std::string, int> out;
  for (const auto& [id, rp] : p.roles) out["role:" + id] = rp.version;
  for (const auto& ap : p.aggregators) out["round" + std::to_string(ap.round_index)] = ap.version;
  return out;
}

inline nlohmann::json to_json(const HistoryRow& r) {
  return {{"iteration", r.iteration}, {"phase", r.phase}, {"targets", r.targets}, {"accuracy", r.accuracy}};
}

inline nlohmann::json to_json(const LedgerSnapshot& s) {
  nlohmann::json roles = nlohmann::json::array();
  for (const auto& r : s.roles) roles.push_back({{"role_id", r.role_id}, {"credit", r.credit}, {"failures", r.failure_count}});
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.rounds) rounds.push_back({{"round", r.round_index}, {"alpha", r.alpha}, {"buffer", r.buffer_count}});
  return {{"iteration", s.iteration}, {"roles", roles}, {"rounds", rounds}};
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : m.history) history.push_back(to_json(r));
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : m.snapshots) snaps.push_back(to_json(s));
  return {{"schema", kLogSchema},         {"config", m.config},
          {"asset_hashes", m.asset_hashes}, {"seeds", m.seeds},
          {"generator", m.generator},     {"history", history},
          {"snapshots", snaps},           {"prompt_versions", m.prompt_versions},
          {"iterations", m.iterations},   {"stop_reason", m.stop_reason}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    if (j.value("schema", std::string()) != kLogSchema) throw Error(ErrorCode::kSchemaMismatch, "manifest schema");
    m.config = j.at("config");
    m.asset_hashes = j.at("asset_hashes").get<std::map<std::string, std::string>>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.generator = j.at("generator").get<std::string>();
    for (const auto& r : j.at("history")) {
      m.history.push_back({r.at("iteration").get<int>(), r.at("phase").get<std::string>(),
                           r.at("targets").get<std::vector<std::string>>(), r.at("accuracy").get<double>()});
    }
    for (const auto& s : j.at("snapshots")) {
      LedgerSnapshot snap{s.at("iteration").get<int>(), {}, {}};
      for (const auto& r : s.at("roles")) {
        snap.roles.push_back({r.at("role_id").get<std::string>(), r.at("credit").get<double>(), r.at("failures").get<int>()});
      }
      for (const auto& r : s.at("rounds")) {
        snap.rounds.push_back({r.at("round").get<int>(), r.at("alpha").get<double>(), r.at("buffer").get<int>()});
      }
      m.snapshots.push_back(std::move(snap));
    }
    m.prompt_versions = j.at("prompt_versions").get<std::map<std::string, int>>();
    m.iterations = j.at("iterations").get<int>();
    m.stop_reason = j.at("stop_reason").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("manifest: ") + e.what());
  }
  return m;
}

struct OptimizationResult {
  PromptSet prompts;
  RunManifest manifest;
  OptimizerState state;
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(PromptSet best, OptimizerState state, const std::string& cause)
      : Error(ErrorCode::kBudgetExhausted, "call budget exhausted: " + cause),
        best_(std::move(best)),
        state_(std::move(state)) {}
  const PromptSet& best() const { return best_; }
  const OptimizerState& state() const { return state_; }

 private:
  PromptSet best_;
  OptimizerState state_;
};

// Repeats bcd_step until K_max steps or until the step-start accuracy fails
// to beat the best so far by more than epsilon for `patience` steps in a row.
inline OptimizationResult run_optimization(const BcdContext& ctx, const PromptSet& initial, RunManifest manifest = {}) {
  ctx.config.validate();
  ctx.topology.validate();
  initial.validate(ctx.topology);
  require_optimization_instances(ctx);
  if (ctx.instances.empty()) throw Error(ErrorCode::kPrecondition, "no optimization instances");

  CreditLedger ledger(ctx.config.credit);
  OptimizerState state;
  state.prompts = initial;
  double best_accuracy = -std::numeric_limits<double>::infinity();
  PromptSet best = initial;
  int stale = 0;
  manifest.stop_reason = "k_max";
  for (int step = 0; step < ctx.config.k_max; ++step) {
    const PromptSet start = state.prompts;
    try {
      state = bcd_step(std::move(state), ctx, ledger);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kBudgetExceeded) throw;
      throw BudgetExhausted(best, state, e.what());
    }
    const double accuracy = state.history[state.history.size() - 2].accuracy;
    if (accuracy > best_accuracy + ctx.config.epsilon) {
      best_accuracy = accuracy;
      best = start;
      stale = 0;
    } else if (++stale >= ctx.config.patience) {
      manifest.stop_reason = "saturated";
      break;
    }
  }
  manifest.asset_hashes = ctx.assets.hashes();
  manifest.generator = ctx.split.generator;
  manifest.history = state.history;
  manifest.snapshots = state.snapshots;
  manifest.prompt_versions = prompt_versions(state.prompts);
  manifest.iterations = state.iteration;
  return {state.prompts, std::move(manifest), std::move(state)};
}

// ---- evaluation logs --------------------------------------------------------

// Earliest round from which every shared state already names the final answer.
inline int decided_round(const Trajectory& traj) {
  int round = static_cast<int>(traj.states.size());
  for (int r = round; r >= 1; --r) {
    if (extract_answer(traj.states[static_cast<std::size_t>(r - 1)].text) != traj.final_answer) break;
    round = r;
  }
  return std::max(round, 1);
}

// Evaluation log entry; pattern and score come from a critic verdict on the
// final shared state.
inline LogRecord make_log_record(const Trajectory& traj, const TaskInstance& instance, const PromptSet& prompts,
                                 CompletionPort& gateway, const PromptAssets& assets, const CriticOptions& options = {}) {
  if (traj.states.empty()) throw Error(ErrorCode::kPrecondition, "trajectory " + traj.instance_id + " has no rounds");
  const auto& last = traj.states.back();
  const EvalRecord verdict = evaluate_turn({"aggregator", last.round_index, last.text}, instance, gateway, assets, options);
  LogRecord r;
  r.instance_id = traj.instance_id;
  r.final_answer = traj.final_answer;
  r.correct = traj.score == 1;
  r.decided_round = decided_round(traj);
  r.pattern = verdict.pattern;
  r.score = verdict.raw_score;
  r.prompt_versions = prompt_versions(prompts);
  r.category = instance.category;
  return r;
}

}  // namespace creditloom
