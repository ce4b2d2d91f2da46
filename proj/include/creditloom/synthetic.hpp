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

// Seeded scripted world used as ground truth in tests and in `simulate`.
//
// Every agent has a planted competence (probability of naming the gold
// label), every round aggregator a planted reliability (probability of
// reporting the plurality answer of its round faithfully; otherwise it
// reports some other label). Critics and the judge see the gold label. The
// optimizer appends a marker to any prompt it rewrites; prompts carrying the
// marker switch to the "improved" competence/reliability when one is
// configured, which is how a successful rewrite is modelled.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "creditloom/answer.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/rng.hpp"
#include "creditloom/task.hpp"

namespace creditloom {

inline constexpr std::string_view kRewriteMarker = "IMPROVED:";

struct SyntheticProfile {
  std::map<std::string, double> role_competence;
  std::map<int, double> aggregator_reliability;  // round index -> probability
  double judge_noise = 0.0;
  std::uint64_t seed = 0;
  // Values in force once a prompt carries the rewrite marker. Absent keys
  // keep the planted value.
  std::map<std::string, double> improved_competence;
  std::map<int, double> improved_reliability;

  void validate() const {
    auto check = [](double p, const std::string& what) {
      if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kRangeViolation, what + " must lie in [0,1]");
    };
    for (const auto& [k, v] : role_competence) check(v, "competence of " + k);
    for (const auto& [k, v] : improved_competence) check(v, "improved competence of " + k);
    for (const auto& [k, v] : aggregator_reliability) check(v, "reliability of round " + std::to_string(k));
    for (const auto& [k, v] : improved_reliability) check(v, "improved reliability of round " + std::to_string(k));
    if (!(judge_noise >= 0.0)) throw Error(ErrorCode::kRangeViolation, "judge_noise must be >= 0");
  }
};

namespace detail {

inline OptionLabel random_label_except(OptionLabel excluded, DeterministicRng& rng) {
  std::vector<OptionLabel> pool;
  for (auto l : kValidOptions) {
    if (l != excluded) pool.push_back(l);
  }
  return pool[rng.below(pool.size())];
}

inline std::string format_score(double raw) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", raw);
  return buf;
}

}  // namespace detail

// Text whose first standalone option token is gold with probability equal to
// the role's competence, otherwise a uniformly drawn wrong label.
inline std::string synthesize_utterance(const SyntheticProfile& profile, const std::string& role_id,
                                        int round, OptionLabel gold, DeterministicRng& rng,
                                        bool improved = false) {
  auto it = profile.role_competence.find(role_id);
  if (it == profile.role_competence.end()) throw Error(ErrorCode::kUnknownRole, role_id);
  double competence = it->second;
  if (improved) {
    if (auto up = profile.improved_competence.find(role_id); up != profile.improved_competence.end()) {
      competence = up->second;
    }
  }
  const OptionLabel answer = rng.bernoulli(competence) ? gold : detail::random_label_except(gold, rng);
  // Role ids stay out of the text: an id such as "B" would be read as an answer.
  return "Round " + std::to_string(round) + ": after weighing the evidence, my answer is " + to_string(answer) + ".";
}

// Plurality over valid answers; ties resolved by a uniform draw among the
// tied labels. Invalid when no answer is valid.
inline OptionLabel plurality_answer(const std::vector<OptionLabel>& answers, DeterministicRng& rng) {
  std::array<int, 4> counts{};
  for (auto a : answers) {
    if (is_valid(a)) ++counts[static_cast<std::size_t>(a)];
  }
  const int best = *std::max_element(counts.begin(), counts.end());
  if (best == 0) return OptionLabel::kInvalid;
  std::vector<OptionLabel> tied;
  for (auto l : kValidOptions) {
    if (counts[static_cast<std::size_t>(l)] == best) tied.push_back(l);
  }
  return tied.size() == 1 ? tied.front() : tied[rng.below(tied.size())];
}

class SyntheticGateway final : public CompletionPort {
 public:
  SyntheticGateway(SyntheticProfile profile, const std::vector<TaskInstance>& instances)
      : profile_(std::move(profile)) {
    profile_.validate();
    for (const auto& x : instances) gold_.emplace(x.id, x.gold);
  }

  std::string complete(const CompletionRequest& request) override {
    validate(request);
    // Randomness is a pure function of (seed, request), so neither call
    // order nor concurrency can change an outcome.
    DeterministicRng rng(derive_seed(profile_.seed, digest_prefix_u64(fingerprint(request))));
    const auto& ctx = request.context;
    switch (request.tag) {
      case CallTag::kRole:
        return synthesize_utterance(profile_, ctx.role_id, ctx.round_index, gold_of(ctx.instance_id), rng,
                                    request.user_text.find(kRewriteMarker) != std::string::npos);
      case CallTag::kAggregator:
        return aggregate(request, rng);
      case CallTag::kCritic:
        return critique(request, rng);
      case CallTag::kAggregationCritic: {
        const bool ok = extract_answer(ctx.subject) == gold_of(ctx.instance_id);
        return std::string("Score: ") + (ok ? "5" : "1");
      }
      case CallTag::kJudge:
        return judge(request, rng);
      case CallTag::kDiagnosis:
        return "The agent tends to settle on conclusions before checking them against the question's "
               "constraints, and grounds its choice in loosely related knowledge rather than the "
               "specifics of the case.";
      case CallTag::kOptimizer:
        return std::string(kRewriteMarker) + " " + ctx.subject;
      case CallTag::kDecision:
        return "Final answer: " + to_string(extract_answer(ctx.subject));
    }
    return {};
  }

  const SyntheticProfile& profile() const { return profile_; }

 private:
  OptionLabel gold_of(const std::string& id) const {
    auto it = gold_.find(id);
    if (it == gold_.end()) throw Error(ErrorCode::kPrecondition, "synthetic world has no instance " + id);
    return it->second;
  }

  double reliability(int round, bool improved) const {
    auto it = profile_.aggregator_reliability.find(round);
    double r = it == profile_.aggregator_reliability.end() ? 1.0 : it->second;
    if (improved) {
      if (auto up = profile_.improved_reliability.find(round); up != profile_.improved_reliability.end()) {
        r = up->second;
      }
    }
    return r;
  }

  std::string aggregate(const CompletionRequest& request, DeterministicRng& rng) const {
    const int round = request.context.round_index;
    std::vector<OptionLabel> answers;
    for (const auto& [role, text] : request.context.items) answers.push_back(extract_answer(text));
    const OptionLabel majority = plurality_answer(answers, rng);
    const bool faithful =
        rng.bernoulli(reliability(round, request.system_text.find(kRewriteMarker) != std::string::npos));
    const OptionLabel reported = faithful ? majority : detail::random_label_except(majority, rng);
    if (!is_valid(reported)) return "Round " + std::to_string(round) + " summary: no consensus was reached.";
    return "Round " + std::to_string(round) + " summary: the group's current answer is " + to_string(reported) +
           ".";
  }

  std::string critique(const CompletionRequest& request, DeterministicRng& rng) const {
    const bool ok = extract_answer(request.context.subject) == gold_of(request.context.instance_id);
    std::string out = "- Final answer correctness: ";
    if (ok) {
      out += "correct\n- Primary failure or risk pattern: NONE\n"
             "- Brief explanation: The reasoning identifies the decisive constraint and follows it through.\n"
             "- Score: 5";
      return out;
    }
    const auto pattern = kAllPatterns[rng.below(kAllPatterns.size() - 1)];  // never NONE
    out += "incorrect\n- Primary failure or risk pattern: ";
    out += to_string(pattern);
    out += "\n- Brief explanation: The chosen option does not follow from the stated conditions.\n- Score: ";
    out += std::to_string(1 + rng.below(2));
    return out;
  }

  std::string judge(const CompletionRequest& request, DeterministicRng& rng) const {
    const OptionLabel gold = gold_of(request.context.instance_id);
    std::string out;
    for (const auto& [role, text] : request.context.items) {
      const double indicator = extract_answer(text) == gold ? 1.0 : 0.0;
      const double jitter = profile_.judge_noise * (2.0 * rng.uniform01() - 1.0);
      const double p = std::clamp(indicator + jitter, 0.0, 1.0);
      out += role + ": " + detail::format_score(5.0 * p) + "\n";
    }
    return out;
  }

  SyntheticProfile profile_;
  std::unordered_map<std::string, OptionLabel> gold_;
};

// Instances with seeded uniformly random gold labels.
inline std::vector<TaskInstance> make_synthetic_instances(std::size_t count, std::uint64_t seed) {
  DeterministicRng rng(derive_seed(seed, 0x5157ULL));
  std::vector<TaskInstance> out;
  out.reserve(count);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(count).size()));
  for (std::size_t i = 0; i < count; ++i) {
    std::string num = std::to_string(i);
    num.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0');
    TaskInstance x;
    x.id = "syn-" + num;
    x.question = "Synthetic question " + num + ": which option is correct?";
    x.options = {"first choice", "second choice", "third choice", "fourth choice"};
    x.gold = kValidOptions[rng.below(4)];
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace creditloom
