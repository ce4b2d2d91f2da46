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

// Prompt texts sent to critics and optimizers. The same texts ship under
// prompts/assets/; a unit test keeps the two copies identical. "verbatim"
// assets reproduce the published evaluation protocol exactly and must not
// be edited; "authored" assets were written for this project.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "creditloom/digest.hpp"
#include "creditloom/errors.hpp"

namespace creditloom {

inline constexpr std::string_view kAgentTurnEvalPrompt = R"asset(You are an experienced question evaluation specialist and failure-analysis prompt engineer.

You are given:
1) A multiple-choice question with options A, B, C, and D.
2) The gold correct answer.
3) The final answer produced by ONE debating agent.

Your task is NOT to solve the question again.

Your task is to evaluate this agent’s final answer independently and assign a score that reflects the quality of its reasoning and decision-making.

You must:
- Determine whether the final answer is correct.
- If incorrect, identify the primary reason for failure using a predefined category.
- If correct, assess whether the reasoning is robust or fragile.
- Assign a numerical score that can be accumulated across many questions.

--------------------------------
Failure pattern taxonomy (choose EXACTLY ONE):

You MUST select exactly one of the following labels.
Do NOT invent new labels.

- DOMAIN_MISMATCH  
  The agent reasons from an inappropriate domain or role (e.g., ethical, economic, or technical framing instead of task-relevant reasoning).

- KNOWLEDGE_DEFICIT  
  The agent lacks or misuses core domain knowledge, leading to factual or conceptual errors.

- MISINTERPRET_QUESTION  
  The agent misunderstands key constraints, conditions, or intent of the question.

- INCOMPLETE_REASONING  
  The agent’s reasoning is partially correct but missing critical logical steps or justification.

- OVERGENERALIZATION  
  The agent applies generic patterns or heuristics without adequately considering case-specific details.

- MISALIGNED_OBJECTIVE  
  The agent answers a different question than what is being asked (e.g., treatment vs diagnosis).

- INSUFFICIENT_JUSTIFICATION  
  The conclusion may be correct, but the reasoning is weak, shallow, or insufficiently supported.

- RANDOM_OR_UNGROUNDED  
  The answer appears arbitrary, speculative, or not grounded in the provided information.

- NONE  
  The answer is correct and the reasoning is sound.

--------------------------------
Scoring rules:
- Scores must be integers from 0 to 5.
- 5 = Correct answer with strong, well-justified reasoning.
- 3–4 = Correct answer but with weak, incomplete, or risky reasoning.
- 1–2 = Incorrect answer due to reasoning or judgment errors.
- 0 = Incorrect answer due to fundamental misunderstanding or systematic reasoning failure.

Consistency rules:
- If the answer is correct, failure_pattern MUST be "NONE".
- If the answer is incorrect, failure_pattern MUST NOT be "NONE".

Output format:
- Final answer correctness: correct / incorrect
- Primary failure or risk pattern: <one of the predefined labels>
- Brief explanation: 1–2 sentences focused on reasoning quality
- Score: <integer 0–5>

Additional rules:
1. Do NOT restate the full question or options.
2. Do NOT compare with other agents.
3. Do NOT suggest prompt changes explicitly.
4. Focus on issues that could be mitigated by improving the agent’s prompt or debate behavior.
5. Be concise, consistent, and scoring-oriented.
)asset";

inline constexpr std::string_view kAgentDiagnosisPrompt = R"asset(You are an attribution analyst for a multi-agent reasoning system.

Your role is to analyze summarized error information produced by a single agent
and generate a concise attribution summary of the agent’s systematic failure characteristics.

The input you receive is a structured summary grouped by failure types.
For each failure type, the input provides:
- how frequently this failure occurred, and
- a small number of representative example explanations.

You should treat the frequency information as an indicator of how systematic
and dominant each failure pattern is.
The example explanations are only illustrative signals and do NOT represent all errors.

You are NOT responsible for fixing the errors or rewriting the agent’s role prompt.
Your task is strictly to identify and summarize why the errors occurred.

When producing the attribution summary:

- Focus on dominant and recurring failure patterns, prioritizing those with higher frequency.
- Identify shared reasoning weaknesses, perspective mismatches, or systematic misalignments.
- Abstract away from individual questions, examples, or surface details.
- Do NOT repeat or quote raw explanations.
- Do NOT enumerate failure types or counts explicitly.
- Do NOT include task-specific facts or domain knowledge.

Your summary should capture, at an appropriate level of abstraction:
- role or perspective mismatches,
- reasoning or interpretation deficiencies,
- knowledge usage or grounding issues,
if they are reflected in the summarized failures.

The output should be concise, structured in natural language,
and suitable for downstream prompt refinement modules.

Output only the attribution summary.
Do not include analysis, bullet points, statistics, or recommendations.
)asset";

inline constexpr std::string_view kRolePromptOptimizePrompt = R"asset(You are a prompt refinement module for a multi-agent reasoning system.

Your task is to correct and reconstruct an agent's role prompt based on
aggregated evaluation failures. The original role prompt may contain
invalid assumptions, missing constraints, or misleading reasoning guidance.
Do NOT assume the original prompt is correct.

Use the failure summary to infer systematic issues in three aspects:
(1) role and perspective alignment,
(2) reasoning and interpretation discipline,
(3) knowledge use and grounding.

Follow these principles implicitly:

1. Role and objective correction:
   - If failures indicate domain mismatch or objective misalignment,
     remove or correct the role perspective, focus, or priorities
     that cause the agent to reason from an inappropriate viewpoint
     or answer the wrong question.

2. Reasoning discipline reconstruction:
   - If failures indicate misinterpretation, incomplete reasoning,
     overgeneralization, or weak justification,
     introduce clearer reasoning requirements such as
     careful question interpretation, constraint checking,
     step-by-step reasoning, and explicit justification.

3. Knowledge use and grounding control:
   - If failures indicate knowledge deficits or ungrounded responses,
     strengthen guidance on using only relevant, task-appropriate knowledge
     and avoiding speculative or unsupported conclusions.

Constraints:
- Do not preserve incorrect assumptions from the original prompt.
- Do not add task-specific facts or external domain knowledge.
- Do not overfit to individual examples; address systematic behavior only.
- Keep the reconstructed prompt concise and suitable for debate-based interaction.

Output only the reconstructed role prompt.
Do not include analysis, explanations, or failure labels.
)asset";

inline constexpr std::string_view kPeerJudgePrompt = R"asset(You are the judge of one round of a multi-agent debate over a multiple-choice question.

You are given the question, its options, and every agent's contribution for this round.
Assess how much each agent's contribution helps the group reach a well-grounded, correct decision.
Consider the correctness of the stated answer, the quality of the reasoning, and whether the contribution
adds information the group would otherwise lack.

Scoring rules:
- Score every agent listed, exactly once.
- Scores are integers from 0 to 5 (5 = decisive, well-grounded contribution; 0 = misleading or empty).

Output format (one line per agent, nothing else):
<agent_id>: <integer 0-5>
)asset";

inline constexpr std::string_view kAggregatorOptimizePrompt = R"asset(You are a prompt refinement module for the aggregation step of a multi-agent reasoning system.

The aggregator reads every agent's answer for one debate round and writes the shared state that the
next round (or the final decision) depends on. You are given the aggregator's current instruction
and a set of failure cases from this round. In every case at least one agent gave the correct answer,
yet the aggregated state reported a wrong one: the correct signal was lost during aggregation.

Rewrite the aggregator instruction so that it preserves well-supported minority answers, weighs
reasoning quality rather than headcount alone, checks each candidate answer against the question's
constraints, and states a single final option letter in the shared state.

Constraints:
- Do not add task-specific facts or external domain knowledge.
- Do not overfit to individual cases; address the systematic behaviour only.
- Keep the instruction concise.

Output only the rewritten aggregator instruction.
)asset";

inline constexpr std::string_view kAggregationEvalPrompt = R"asset(You are evaluating the shared state produced by the aggregation step of a multi-agent debate.

You are given a multiple-choice question, the gold answer, and the aggregated state.
Judge how well the state supports reaching the gold answer: whether it names the correct option and
whether its summary of the debate is faithful and well grounded.

Scoring rules:
- Scores must be integers from 0 to 5.
- 5 = names the correct option with a faithful, well-grounded summary.
- 0 = names a wrong option or no option, or misrepresents the debate.

Output format:
Score: <integer 0-5>
)asset";

inline constexpr std::string_view kTerminalDecisionPrompt = R"asset(You make the final decision for a multi-agent debate over a multiple-choice question.

You are given the question, its options, and the shared state after the last round.
Choose the single option best supported by the shared state.

Output only the option letter (A, B, C, or D).
)asset";

enum class AssetProvenance { kVerbatim, kAuthored };

struct PromptAssetInfo {
  std::string_view name;  // file name under prompts/assets/
  std::string_view builtin;
  AssetProvenance provenance;
};

inline constexpr std::array<PromptAssetInfo, 7> kPromptAssets = {{
    {"agent_turn_eval.txt", kAgentTurnEvalPrompt, AssetProvenance::kVerbatim},
    {"agent_diagnosis.txt", kAgentDiagnosisPrompt, AssetProvenance::kVerbatim},
    {"role_prompt_optimize.txt", kRolePromptOptimizePrompt, AssetProvenance::kVerbatim},
    {"peer_judge.txt", kPeerJudgePrompt, AssetProvenance::kAuthored},
    {"aggregator_optimize.txt", kAggregatorOptimizePrompt, AssetProvenance::kAuthored},
    {"aggregation_eval.txt", kAggregationEvalPrompt, AssetProvenance::kAuthored},
    {"terminal_decision.txt", kTerminalDecisionPrompt, AssetProvenance::kAuthored},
}};

// Resolved prompt texts for one run: built-in texts, optionally overridden by
// files found in an assets directory.
class PromptAssets {
 public:
  PromptAssets() {
    for (const auto& a : kPromptAssets) texts_.emplace(std::string(a.name), std::string(a.builtin));
  }

  // Files present in `dir` replace the built-ins; missing files keep them.
  static PromptAssets load(const std::filesystem::path& dir) {
    PromptAssets assets;
    for (const auto& a : kPromptAssets) {
      const auto path = dir / a.name;
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(ErrorCode::kIo, "cannot read prompt asset " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      assets.texts_[std::string(a.name)] = ss.str();
    }
    return assets;
  }

  const std::string& get(std::string_view name) const {
    auto it = texts_.find(std::string(name));
    if (it == texts_.end()) throw Error(ErrorCode::kConfig, "unknown prompt asset " + std::string(name));
    return it->second;
  }

  const std::string& agent_turn_eval() const { return get("agent_turn_eval.txt"); }
  const std::string& agent_diagnosis() const { return get("agent_diagnosis.txt"); }
  const std::string& role_prompt_optimize() const { return get("role_prompt_optimize.txt"); }
  const std::string& peer_judge() const { return get("peer_judge.txt"); }
  const std::string& aggregator_optimize() const { return get("aggregator_optimize.txt"); }
  const std::string& aggregation_eval() const { return get("aggregation_eval.txt"); }
  const std::string& terminal_decision() const { return get("terminal_decision.txt"); }

  // name -> sha256 of the text in force, for the run manifest.
  std::map<std::string, std::string> hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, text] : texts_) out.emplace(name, sha256_hex(text));
    return out;
  }

 private:
  std::map<std::string, std::string> texts_;
};

}  // namespace creditloom
