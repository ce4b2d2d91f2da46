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
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditloom/digest.hpp"
#include "creditloom/errors.hpp"

namespace creditloom {

// Who is asking. Part of the cache key, so critic traffic never aliases
// agent traffic even when the texts coincide.
enum class CallTag {
  kRole,
  kAggregator,
  kCritic,
  kAggregationCritic,
  kJudge,
  kDiagnosis,
  kOptimizer,
  kDecision,
};

inline constexpr std::array<CallTag, 8> kAllCallTags = {
    CallTag::kRole,  CallTag::kAggregator, CallTag::kCritic,    CallTag::kAggregationCritic,
    CallTag::kJudge, CallTag::kDiagnosis,  CallTag::kOptimizer, CallTag::kDecision};

inline std::string_view to_string(CallTag tag) {
  switch (tag) {
    case CallTag::kRole: return "role";
    case CallTag::kAggregator: return "aggregator";
    case CallTag::kCritic: return "critic";
    case CallTag::kAggregationCritic: return "aggregation_critic";
    case CallTag::kJudge: return "judge";
    case CallTag::kDiagnosis: return "diagnosis";
    case CallTag::kOptimizer: return "optimizer";
    case CallTag::kDecision: return "decision";
  }
  return "role";
}

inline std::optional<CallTag> parse_call_tag(std::string_view s) {
  for (auto t : kAllCallTags) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

inline constexpr double kRoleTemperature = 0.7;
inline constexpr double kEvaluatorTemperature = 0.0;

// Structured side information about a request. Live endpoints never see it;
// the synthetic world uses it in place of reading the prose.
struct RequestContext {
  std::string instance_id;
  std::string role_id;
  int round_index = 0;
  // The single text under evaluation or rewrite (an answer, a prompt).
  std::string subject;
  // Labelled texts, e.g. (role_id, utterance) pairs of one round.
  std::vector<std::pair<std::string, std::string>> items;

  bool operator==(const RequestContext&) const = default;
};

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  double temperature = kRoleTemperature;
  int max_tokens = 512;
  CallTag tag = CallTag::kRole;
  RequestContext context;

  bool operator==(const CompletionRequest&) const = default;
};

inline void validate(const CompletionRequest& r) {
  if (r.system_text.empty() || r.user_text.empty()) {
    throw Error(ErrorCode::kPrecondition, "completion request texts must be non-empty");
  }
  if (!(r.temperature >= 0.0)) throw Error(ErrorCode::kPrecondition, "temperature must be >= 0");
  if (r.max_tokens <= 0) throw Error(ErrorCode::kPrecondition, "max_tokens must be positive");
}

inline nlohmann::json to_json(const CompletionRequest& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& [label, text] : r.context.items) items.push_back({label, text});
  return {
      {"system", r.system_text},
      {"user", r.user_text},
      {"temperature", r.temperature},
      {"max_tokens", r.max_tokens},
      {"tag", std::string(to_string(r.tag))},
      {"context",
       {{"instance_id", r.context.instance_id},
        {"role_id", r.context.role_id},
        {"round", r.context.round_index},
        {"subject", r.context.subject},
        {"items", std::move(items)}}},
  };
}

inline CompletionRequest request_from_json(const nlohmann::json& j) {
  CompletionRequest r;
  r.system_text = j.at("system").get<std::string>();
  r.user_text = j.at("user").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.max_tokens = j.at("max_tokens").get<int>();
  auto tag = parse_call_tag(j.at("tag").get<std::string>());
  if (!tag) throw Error(ErrorCode::kSchemaMismatch, "unknown call tag");
  r.tag = *tag;
  const auto& c = j.at("context");
  r.context.instance_id = c.at("instance_id").get<std::string>();
  r.context.role_id = c.at("role_id").get<std::string>();
  r.context.round_index = c.at("round").get<int>();
  r.context.subject = c.at("subject").get<std::string>();
  for (const auto& item : c.at("items")) {
    r.context.items.emplace_back(item.at(0).get<std::string>(), item.at(1).get<std::string>());
  }
  return r;
}

// SHA-256 over the canonical JSON form (object keys sorted). Every field
// participates.
inline std::string fingerprint(const CompletionRequest& r) { return sha256_hex(to_json(r).dump()); }

// The one interface every model call goes through. Implementations must be
// safe to call from several threads at once.
class CompletionPort {
 public:
  virtual ~CompletionPort() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Counts calls per tag and enforces an optional call budget.
class MeteredPort final : public CompletionPort {
 public:
  explicit MeteredPort(CompletionPort& inner, std::optional<std::uint64_t> max_calls = std::nullopt)
      : inner_(inner), max_calls_(max_calls) {}

  std::string complete(const CompletionRequest& request) override {
    const auto n = total_.fetch_add(1) + 1;
    if (max_calls_ && n > *max_calls_) {
      throw Error(ErrorCode::kBudgetExceeded,
                  "call budget of " + std::to_string(*max_calls_) + " exhausted");
    }
    per_tag_[static_cast<std::size_t>(request.tag)].fetch_add(1);
    return inner_.complete(request);
  }

  std::uint64_t calls() const { return total_.load(); }
  std::uint64_t calls(CallTag tag) const { return per_tag_[static_cast<std::size_t>(tag)].load(); }

 private:
  CompletionPort& inner_;
  std::optional<std::uint64_t> max_calls_;
  std::atomic<std::uint64_t> total_{0};
  std::array<std::atomic<std::uint64_t>, kAllCallTags.size()> per_tag_{};
};

}  // namespace creditloom
