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

// Structural (per-role) and temporal (per-round) credit.
//
//   c_{i,t}  = lambda * q_{i,t} + (1 - lambda) * p_{i,t}
//   C_i      = mean of the c_{i,t} observed for role i
//   alpha_t  starts at 1 and decays to (1 - beta) * alpha_t on every
//            informative failure of round t (aggregator wrong while at least
//            one agent was right); nothing else moves it.
//
// The ledger is single-writer. Observations produced concurrently are
// collected first and applied in one ordered pass.

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "creditloom/critic.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/labels.hpp"

namespace creditloom {

enum class EmaVariant {
  kFailureGated,  // decay toward 0 on informative failures only
  kSymmetric,     // alpha <- (1-beta) alpha + beta * [success] on every event
};

enum class RoleSelection { kBottomK, kThreshold };

struct CreditConfig {
  double lambda = 0.5;
  double ema_rate = 0.2;
  double threshold = 0.7;
  int buffer_min = 5;
  int bottom_k = 2;
  EmaVariant ema_variant = EmaVariant::kFailureGated;
  RoleSelection role_selection = RoleSelection::kBottomK;
  double role_threshold = 0.5;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::kRangeViolation, "lambda must lie in [0,1]");
    if (!(ema_rate > 0.0 && ema_rate <= 1.0)) throw Error(ErrorCode::kRangeViolation, "ema_rate must lie in (0,1]");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::kRangeViolation, "threshold must lie in [0,1]");
    if (!(role_threshold >= 0.0 && role_threshold <= 1.0)) {
      throw Error(ErrorCode::kRangeViolation, "role_threshold must lie in [0,1]");
    }
    if (buffer_min < 1) throw Error(ErrorCode::kRangeViolation, "buffer_min must be positive");
    if (bottom_k < 1) throw Error(ErrorCode::kRangeViolation, "bottom_k must be positive");
  }
};

inline double fuse_role_signal(double q, double p, double lambda) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(q) || !in_unit(p) || !in_unit(lambda)) {
    throw Error(ErrorCode::kRangeViolation, "fuse_role_signal inputs must lie in [0,1]");
  }
  return lambda * q + (1.0 - lambda) * p;
}

inline double role_credit(const std::vector<double>& observations) {
  if (observations.empty()) throw Error(ErrorCode::kEmptyObservations, "no observations for role");
  return std::accumulate(observations.begin(), observations.end(), 0.0) / static_cast<double>(observations.size());
}

enum class RoundEventKind { kSuccess, kInformativeFailure, kUninformativeFailure };

inline std::string_view to_string(RoundEventKind k) {
  switch (k) {
    case RoundEventKind::kSuccess: return "Success";
    case RoundEventKind::kInformativeFailure: return "InformativeFailure";
    case RoundEventKind::kUninformativeFailure: return "UninformativeFailure";
  }
  return "Success";
}

inline RoundEventKind classify_event(OptionLabel gold, OptionLabel agg_answer, const std::vector<OptionLabel>& agent_answers) {
  if (agg_answer == gold) return RoundEventKind::kSuccess;
  const bool some_agent_right = std::find(agent_answers.begin(), agent_answers.end(), gold) != agent_answers.end();
  return some_agent_right ? RoundEventKind::kInformativeFailure : RoundEventKind::kUninformativeFailure;
}

// Evidence kept for an aggregator rewrite: a case where a correct agent
// answer was lost in aggregation.
struct FailureExemplar {
  std::string instance_id;
  OptionLabel gold = OptionLabel::kA;
  OptionLabel agg_answer = OptionLabel::kInvalid;
  std::vector<std::pair<std::string, OptionLabel>> agent_answers;

  bool operator==(const FailureExemplar&) const = default;
};

struct RoundEvent {
  std::string instance_id;
  int round_index = 1;
  RoundEventKind kind = RoundEventKind::kSuccess;
  FailureExemplar exemplar;
};

struct RoundCreditState {
  std::vector<double> alpha;                         // alpha[t-1]
  std::vector<std::vector<FailureExemplar>> buffer;  // informative failures since last reset
  std::vector<int> informative_count;

  explicit RoundCreditState(int num_rounds = 0)
      : alpha(static_cast<std::size_t>(num_rounds), 1.0),
        buffer(static_cast<std::size_t>(num_rounds)),
        informative_count(static_cast<std::size_t>(num_rounds), 0) {}

  int num_rounds() const { return static_cast<int>(alpha.size()); }

  bool operator==(const RoundCreditState&) const = default;
};

inline RoundCreditState update_round_credit(RoundCreditState state, const RoundEvent& event, const CreditConfig& config) {
  if (event.round_index < 1 || event.round_index > state.num_rounds()) {
    throw Error(ErrorCode::kPrecondition, "event round out of range");
  }
  const auto i = static_cast<std::size_t>(event.round_index - 1);
  const double beta = config.ema_rate;
  if (event.kind == RoundEventKind::kInformativeFailure) {
    state.alpha[i] = (1.0 - beta) * state.alpha[i];
    state.buffer[i].push_back(event.exemplar);
    ++state.informative_count[i];
  } else if (config.ema_variant == EmaVariant::kSymmetric) {
    const double target = event.kind == RoundEventKind::kSuccess ? 1.0 : 0.0;
    state.alpha[i] = (1.0 - beta) * state.alpha[i] + beta * target;
  }
  return state;
}

// Lowest credits first, ties by ascending role id; returns min(K, N) roles.
inline std::vector<std::string> select_weak_roles(const std::map<std::string, double>& credits, int k) {
  std::vector<std::pair<double, std::string>> order;
  order.reserve(credits.size());
  for (const auto& [id, c] : credits) order.emplace_back(c, id);
  std::sort(order.begin(), order.end());
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), order.size());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(order[i].second);
  return out;
}

// Threshold alternative to bottom-K: every role strictly below `threshold`.
inline std::vector<std::string> select_roles_below(const std::map<std::string, double>& credits, double threshold) {
  std::vector<std::string> out;
  for (const auto& [id, c] : credits) {
    if (c < threshold) out.push_back(id);
  }
  return out;
}

// {t : alpha_t < tau and at least m buffered informative failures}.
inline std::vector<int> select_weak_rounds(const RoundCreditState& state, double tau, int m) {
  std::vector<int> out;
  for (int t = 1; t <= state.num_rounds(); ++t) {
    const auto i = static_cast<std::size_t>(t - 1);
    if (state.alpha[i] < tau && state.informative_count[i] >= m) out.push_back(t);
  }
  return out;
}

struct RoleCreditRow {
  std::string role_id;
  double credit = 0.0;
  int failure_count = 0;
};

struct RoundCreditRow {
  int round_index = 0;
  double alpha = 1.0;
  int buffer_count = 0;
};

struct LedgerSnapshot {
  int iteration = 0;
  std::vector<RoleCreditRow> roles;
  std::vector<RoundCreditRow> rounds;
};

class CreditLedger {
 public:
  explicit CreditLedger(CreditConfig config = {}) : config_(config) { config_.validate(); }

  // Starts a fresh epoch: every alpha back to 1, buffers and observations empty.
  void begin_epoch(const std::vector<std::string>& role_ids, int num_rounds) {
    role_ids_ = role_ids;
    observations_.clear();
    failures_.clear();
    for (const auto& id : role_ids_) {
      observations_[id];
      failures_[id];
    }
    rounds_ = RoundCreditState(num_rounds);
  }

  void add_role_observation(const std::string& role_id, double q, double p) {
    observations_.at(role_id).push_back(fuse_role_signal(q, p, config_.lambda));
  }

  void add_eval_record(const EvalRecord& record) {
    if (record.pattern != FailurePattern::kNone) failures_.at(record.role_id).push_back(record);
  }

  // Roles with no observation are left out.
  std::map<std::string, double> role_credits() const {
    std::map<std::string, double> out;
    for (const auto& [id, obs] : observations_) {
      if (!obs.empty()) out.emplace(id, role_credit(obs));
    }
    return out;
  }

  const std::vector<double>& observations(const std::string& role_id) const { return observations_.at(role_id); }
  const std::vector<EvalRecord>& failures(const std::string& role_id) const { return failures_.at(role_id); }

  // Applies events sorted by (instance_id, round) so the order-sensitive EMA
  // does not depend on the order rollouts finished in.
  void apply_round_events(std::vector<RoundEvent> events) {
    std::stable_sort(events.begin(), events.end(), [](const RoundEvent& a, const RoundEvent& b) {
      return std::tie(a.instance_id, a.round_index) < std::tie(b.instance_id, b.round_index);
    });
    for (const auto& e : events) rounds_ = update_round_credit(std::move(rounds_), e, config_);
  }

  std::vector<std::string> weak_roles() const {
    const auto credits = role_credits();
    return config_.role_selection == RoleSelection::kBottomK ? select_weak_roles(credits, config_.bottom_k)
                                                             : select_roles_below(credits, config_.role_threshold);
  }

  std::vector<int> weak_rounds() const { return select_weak_rounds(rounds_, config_.threshold, config_.buffer_min); }

  const std::vector<FailureExemplar>& round_buffer(int t) const { return rounds_.buffer.at(static_cast<std::size_t>(t - 1)); }

  // Called once an aggregator rewrite has consumed the round's evidence.
  void clear_round_buffer(int t) {
    const auto i = static_cast<std::size_t>(t - 1);
    rounds_.buffer.at(i).clear();
    rounds_.informative_count.at(i) = 0;
  }

  const RoundCreditState& rounds() const { return rounds_; }
  const CreditConfig& config() const { return config_; }

  LedgerSnapshot snapshot(int iteration) const {
    LedgerSnapshot s{iteration, {}, {}};
    const auto credits = role_credits();
    for (const auto& id : role_ids_) {
      auto it = credits.find(id);
      s.roles.push_back({id, it == credits.end() ? 0.0 : it->second, static_cast<int>(failures_.at(id).size())});
    }
    for (int t = 1; t <= rounds_.num_rounds(); ++t) {
      const auto i = static_cast<std::size_t>(t - 1);
      s.rounds.push_back({t, rounds_.alpha[i], rounds_.informative_count[i]});
    }
    return s;
  }

 private:
  CreditConfig config_;
  std::vector<std::string> role_ids_;
  std::map<std::string, std::vector<double>> observations_;
  std::map<std::string, std::vector<EvalRecord>> failures_;
  RoundCreditState rounds_;
};

}  // namespace creditloom
