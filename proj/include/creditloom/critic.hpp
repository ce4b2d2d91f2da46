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

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "creditloom/answer.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/prompt_assets.hpp"
#include "creditloom/protocol.hpp"
#include "creditloom/task.hpp"

namespace creditloom {

// One critic verdict on one agent turn. Invariant after evaluate_turn:
// correct <=> pattern == NONE, q == raw_score / 5.
struct EvalRecord {
  std::string instance_id;
  std::string role_id;
  int round_index = 0;
  bool correct = false;
  FailurePattern pattern = FailurePattern::kNone;
  std::string explanation;
  int raw_score = 0;
  double q = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct ParsedEval {
  bool correct = false;
  FailurePattern pattern = FailurePattern::kNone;
  std::string explanation;
  int score = 0;
};

struct PeerScores {
  int round_index = 0;
  std::map<std::string, double> scores;  // role id -> [0,1]
};

struct AggregationVerdict {
  int round_index = 0;
  OptionLabel agg_answer = OptionLabel::kInvalid;
  double quality = 0.0;
};

enum class AggregationQualityMode { kBinary, kCritic };

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// Trims whitespace plus markdown/quoting decoration around a field value.
inline std::string_view strip_decoration(std::string_view s) {
  const auto junk = " \t\r\n*`\"'<>[]";
  const auto b = s.find_first_not_of(junk);
  if (b == std::string_view::npos) return {};
  s = s.substr(b, s.find_last_not_of(junk) - b + 1);
  while (!s.empty() && s.back() == '.') s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

inline std::string_view after_colon(std::string_view line) {
  const auto c = line.find(':');
  return c == std::string_view::npos ? line : line.substr(c + 1);
}

// First integer following a case-insensitive "score:" marker.
inline std::optional<int> parse_score_field(std::string_view text) {
  const std::string low = lower(text);
  const auto at = low.find("score:");
  if (at == std::string::npos) return std::nullopt;
  std::size_t i = at + 6;
  while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i])) && text[i] != '\n') ++i;
  if (i >= text.size() || text[i] == '\n') return std::nullopt;
  const bool negative = i > at + 6 && text[i - 1] == '-';
  int value = 0;
  auto [p, ec] = std::from_chars(text.data() + i, text.data() + text.size(), value);
  if (ec != std::errc()) return std::nullopt;
  // "4.5" is not an integer score.
  if (p + 1 < text.data() + text.size() && *p == '.' && std::isdigit(static_cast<unsigned char>(p[1]))) {
    return std::nullopt;
  }
  return negative ? -value : value;
}

inline std::string question_block(const TaskInstance& x) {
  return "Question:\n" + x.question + "\n\nOptions:\n" + render_options(x);
}

inline constexpr std::string_view kRequeryNote =
    "\n\nYour previous evaluation did not follow the required output format or consistency rules. "
    "Evaluate again and follow them exactly.";

}  // namespace detail

// Tolerant line-oriented parse of the four-field critic output. Throws
// CriticParseFailure for a missing field, an unknown label, or a score
// outside 0..5.
inline ParsedEval parse_eval_output(std::string_view text) {
  ParsedEval out;
  bool have_correct = false;
  bool have_pattern = false;
  for (auto line : detail::split_lines(text)) {
    const std::string low = detail::lower(line);
    if (!have_correct && low.find("correct") != std::string::npos) {
      const std::string value = detail::lower(detail::trim(detail::after_colon(line)));
      if (value.find("incorrect") != std::string::npos) {
        out.correct = false;
        have_correct = true;
      } else if (value.find("correct") != std::string::npos) {
        out.correct = true;
        have_correct = true;
      }
    } else if (!have_pattern && low.find("pattern") != std::string::npos && line.find(':') != std::string_view::npos) {
      const auto value = detail::strip_decoration(detail::after_colon(line));
      auto pattern = parse_failure_pattern(value);
      if (!pattern) throw Error(ErrorCode::kCriticParseFailure, "unknown failure label '" + std::string(value) + "'");
      out.pattern = *pattern;
      have_pattern = true;
    } else if (out.explanation.empty() && low.find("explanation") != std::string::npos) {
      out.explanation = std::string(detail::trim(detail::after_colon(line)));
    }
  }
  if (!have_correct) throw Error(ErrorCode::kCriticParseFailure, "missing correctness field");
  if (!have_pattern) throw Error(ErrorCode::kCriticParseFailure, "missing failure pattern field");
  auto score = detail::parse_score_field(text);
  if (!score) throw Error(ErrorCode::kCriticParseFailure, "missing or non-integer score");
  if (*score < 0 || *score > 5) {
    throw Error(ErrorCode::kCriticParseFailure, "score " + std::to_string(*score) + " outside 0..5");
  }
  out.score = *score;
  return out;
}

inline bool is_consistent(const ParsedEval& e) { return e.correct == (e.pattern == FailurePattern::kNone); }

// correct => NONE; incorrect with NONE => RANDOM_OR_UNGROUNDED.
inline ParsedEval repair(ParsedEval e) {
  if (e.correct) {
    e.pattern = FailurePattern::kNone;
  } else if (e.pattern == FailurePattern::kNone) {
    e.pattern = FailurePattern::kRandomOrUngrounded;
  }
  return e;
}

struct CriticOptions {
  int max_tokens = 256;
};

// Evaluates one agent turn. An unparseable or inconsistent verdict earns
// exactly one re-query at temperature 0; an inconsistent verdict that
// survives it is repaired deterministically.
inline EvalRecord evaluate_turn(const Utterance& utterance, const TaskInstance& instance, CompletionPort& gateway,
                                const PromptAssets& assets, const CriticOptions& options = {}) {
  CompletionRequest req;
  req.system_text = assets.agent_turn_eval();
  req.user_text = detail::question_block(instance) + "\n\nGold correct answer: " + to_string(instance.gold) +
                  "\n\nFinal answer of the agent:\n" + utterance.text;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = options.max_tokens;
  req.tag = CallTag::kCritic;
  req.context.instance_id = instance.id;
  req.context.role_id = utterance.role_id;
  req.context.round_index = utterance.round_index;
  req.context.subject = utterance.text;

  auto try_parse = [](const std::string& text) -> std::optional<ParsedEval> {
    try {
      return parse_eval_output(text);
    } catch (const Error&) {
      return std::nullopt;
    }
  };

  std::optional<ParsedEval> first = try_parse(gateway.complete(req));
  std::optional<ParsedEval> chosen = first;
  if (!first || !is_consistent(*first)) {
    CompletionRequest again = req;
    again.user_text += detail::kRequeryNote;
    const std::string text = gateway.complete(again);
    std::optional<ParsedEval> second = try_parse(text);
    if (second) {
      chosen = second;
    } else if (!first) {
      parse_eval_output(text);  // rethrows the parse failure
    }
  }
  const ParsedEval verdict = repair(*chosen);
  return {instance.id,
          utterance.role_id,
          utterance.round_index,
          verdict.correct,
          verdict.pattern,
          verdict.explanation,
          verdict.score,
          verdict.score / 5.0};
}

// Parses "<role_id>: <score 0-5>" lines. Every role must be scored.
inline PeerScores parse_judge_output(std::string_view text, const std::vector<std::string>& role_ids, int round) {
  std::map<std::string, double> raw;
  for (auto line : detail::split_lines(text)) {
    auto body = detail::trim(line);
    while (!body.empty() && (body.front() == '-' || body.front() == '*' || body.front() == ' ')) body.remove_prefix(1);
    const auto colon = body.rfind(':');
    if (colon == std::string_view::npos) continue;
    const std::string id(detail::strip_decoration(body.substr(0, colon)));
    const auto value = detail::strip_decoration(body.substr(colon + 1));
    double v = 0.0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || p != value.data() + value.size()) continue;
    raw.emplace(id, v);
  }
  PeerScores out{round, {}};
  for (const auto& id : role_ids) {
    auto it = raw.find(id);
    if (it == raw.end()) throw Error(ErrorCode::kCriticParseFailure, "judge gave no score for " + id);
    if (!(it->second >= 0.0 && it->second <= 5.0)) {
      throw Error(ErrorCode::kCriticParseFailure, "judge score for " + id + " outside 0..5");
    }
    out.scores.emplace(id, it->second / 5.0);
  }
  return out;
}

// One judging call per round over the whole transcript.
inline PeerScores judge_round(const RoundTranscript& transcript, const TaskInstance& instance,
                              CompletionPort& gateway, const PromptAssets& assets,
                              const CriticOptions& options = {}) {
  if (transcript.utterances.empty()) {
    throw Error(ErrorCode::kEmptyTranscript, "round " + std::to_string(transcript.round_index));
  }
  std::vector<std::string> ids;
  for (const auto& u : transcript.utterances) ids.push_back(u.role_id);
  std::string roster;
  for (const auto& id : ids) roster += (roster.empty() ? "" : ", ") + id;

  CompletionRequest req;
  req.system_text = assets.peer_judge();
  req.user_text = detail::question_block(instance) + "\n\nContributions in round " +
                  std::to_string(transcript.round_index) + ":\n\n" + render_transcript(transcript) +
                  "Agents to score: " + roster;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = options.max_tokens;
  req.tag = CallTag::kJudge;
  req.context.instance_id = instance.id;
  req.context.round_index = transcript.round_index;
  for (const auto& u : transcript.utterances) req.context.items.emplace_back(u.role_id, u.text);
  try {
    return parse_judge_output(gateway.complete(req), ids, transcript.round_index);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCriticParseFailure) throw;
  }
  req.user_text += detail::kRequeryNote;
  return parse_judge_output(gateway.complete(req), ids, transcript.round_index);
}

// Temporal quality of S_t: binary correctness by default, or a 0..5 rubric
// score normalized by 5 in critic mode.
inline AggregationVerdict evaluate_aggregation(const SharedState& state, const TaskInstance& instance,
                                               AggregationQualityMode mode = AggregationQualityMode::kBinary,
                                               CompletionPort* gateway = nullptr,
                                               const PromptAssets* assets = nullptr) {
  AggregationVerdict v{state.round_index, extract_answer(state.text), 0.0};
  if (mode == AggregationQualityMode::kBinary) {
    v.quality = v.agg_answer == instance.gold ? 1.0 : 0.0;
    return v;
  }
  if (gateway == nullptr || assets == nullptr) {
    throw Error(ErrorCode::kConfig, "critic-scored aggregation quality needs a gateway");
  }
  CompletionRequest req;
  req.system_text = assets->aggregation_eval();
  req.user_text = detail::question_block(instance) + "\n\nGold correct answer: " + to_string(instance.gold) +
                  "\n\nAggregated state:\n" + state.text;
  req.temperature = kEvaluatorTemperature;
  req.max_tokens = 32;
  req.tag = CallTag::kAggregationCritic;
  req.context.instance_id = instance.id;
  req.context.round_index = state.round_index;
  req.context.subject = state.text;
  auto score = detail::parse_score_field(gateway->complete(req));
  if (!score || *score < 0 || *score > 5) {
    req.user_text += detail::kRequeryNote;
    score = detail::parse_score_field(gateway->complete(req));
  }
  if (!score || *score < 0 || *score > 5) {
    throw Error(ErrorCode::kCriticParseFailure, "aggregation critic gave no score in 0..5");
  }
  v.quality = *score / 5.0;
  return v;
}

}  // namespace creditloom
