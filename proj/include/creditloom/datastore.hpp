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
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditloom/errors.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/protocol.hpp"
#include "creditloom/rng.hpp"
#include "creditloom/task.hpp"

namespace creditloom {

inline constexpr std::string_view kLogSchema = "credit-loom/v1";
inline constexpr std::size_t kOptimizationSetSize = 100;

// ---- datasets ---------------------------------------------------------------

// Parses one dataset line: {"id", "question", "options": {A..D}, "answer",
// optional "category"}. `line_no` is used in error messages.
inline TaskInstance parse_instance(const std::string& line, std::size_t line_no) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::kMalformedRow, "line " + std::to_string(line_no) + ": " + why);
  };
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw fail("not a JSON object");
  auto str = [&](const nlohmann::json& obj, const char* key) -> std::string {
    if (!obj.contains(key) || !obj[key].is_string()) throw fail(std::string("missing string field '") + key + "'");
    return obj[key].get<std::string>();
  };
  TaskInstance x;
  x.id = str(j, "id");
  if (x.id.empty()) throw fail("empty id");
  x.question = str(j, "question");
  if (!j.contains("options") || !j["options"].is_object()) throw fail("missing options object");
  const auto& opts = j["options"];
  for (auto label : kValidOptions) {
    const std::string key(1, option_char(label));
    if (!opts.contains(key) || !opts[key].is_string()) throw fail("missing option " + key);
    x.options[static_cast<std::size_t>(label)] = opts[key].get<std::string>();
  }
  if (opts.size() != 4) throw fail("options must be exactly A, B, C, D");
  const std::string answer = str(j, "answer");
  const auto gold = answer.size() == 1 ? option_from_char(answer[0]) : std::nullopt;
  if (!gold) throw fail("answer '" + answer + "' is not one of A, B, C, D");
  x.gold = *gold;
  if (j.contains("category") && j["category"].is_string()) x.category = j["category"].get<std::string>();
  return x;
}

inline nlohmann::json to_json(const TaskInstance& x) {
  nlohmann::json opts;
  for (auto label : kValidOptions) opts[std::string(1, option_char(label))] = x.option(label);
  nlohmann::json j = {{"id", x.id}, {"question", x.question}, {"options", opts}, {"answer", to_string(x.gold)}};
  if (x.category) j["category"] = *x.category;
  return j;
}

// Instances sorted by id. Blank lines are skipped.
inline std::vector<TaskInstance> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());
  std::vector<TaskInstance> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TaskInstance x = parse_instance(line, line_no);
    if (!seen.insert(x.id).second) {
      throw Error(ErrorCode::kDuplicateId, "line " + std::to_string(line_no) + ": duplicate id " + x.id);
    }
    out.push_back(std::move(x));
  }
  std::sort(out.begin(), out.end(), [](const TaskInstance& a, const TaskInstance& b) { return a.id < b.id; });
  return out;
}

inline void write_dataset(const std::filesystem::path& path, const std::vector<TaskInstance>& instances) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write dataset " + path.string());
  for (const auto& x : instances) out << to_json(x).dump() << '\n';
}

// ---- splits -----------------------------------------------------------------

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::string generator = std::string(kGeneratorId);
  std::vector<std::string> optimization_ids;  // sorted
  std::vector<std::string> test_ids;          // sorted
  std::optional<std::string> warning;

  bool in_optimization(const std::string& id) const {
    return std::binary_search(optimization_ids.begin(), optimization_ids.end(), id);
  }
  bool in_test(const std::string& id) const { return std::binary_search(test_ids.begin(), test_ids.end(), id); }
};

// Fisher-Yates over the ids sorted ascending, driven by DeterministicRng;
// the first `opt_size` ids form the optimization set. Datasets no larger
// than `opt_size` give all but one instance to optimization.
inline DatasetSplit make_splits(const std::vector<TaskInstance>& dataset, std::uint64_t seed,
                                std::size_t opt_size = kOptimizationSetSize) {
  if (dataset.empty()) throw Error(ErrorCode::kPrecondition, "cannot split an empty dataset");
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& x : dataset) ids.push_back(x.id);
  std::sort(ids.begin(), ids.end());
  DeterministicRng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(ids[i], ids[j]);
  }
  DatasetSplit split;
  split.seed = seed;
  std::size_t take = opt_size;
  if (ids.size() <= opt_size) {
    take = ids.size() - 1;
    split.warning = "dataset has " + std::to_string(ids.size()) + " instances; optimization set reduced to " +
                    std::to_string(take);
  }
  split.optimization_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end());
  std::sort(split.optimization_ids.begin(), split.optimization_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

inline nlohmann::json to_json(const DatasetSplit& s) {
  nlohmann::json j = {{"seed", s.seed},
                      {"generator", s.generator},
                      {"optimization_ids", s.optimization_ids},
                      {"test_ids", s.test_ids}};
  if (s.warning) j["warning"] = *s.warning;
  return j;
}

inline DatasetSplit split_from_json(const nlohmann::json& j) {
  DatasetSplit s;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.generator = j.at("generator").get<std::string>();
    s.optimization_ids = j.at("optimization_ids").get<std::vector<std::string>>();
    s.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("split file: ") + e.what());
  }
  std::sort(s.optimization_ids.begin(), s.optimization_ids.end());
  std::sort(s.test_ids.begin(), s.test_ids.end());
  if (j.contains("warning")) s.warning = j["warning"].get<std::string>();
  return s;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kSchemaMismatch, path.string() + " is not valid JSON");
  return j;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Aborts with a data error when any id is outside the optimization set.
inline void require_optimization_ids(const DatasetSplit& split, const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    if (!split.in_optimization(id)) {
      throw Error(ErrorCode::kTestExposure, "instance " + id + " is not in the optimization set");
    }
  }
}

// ---- logs -------------------------------------------------------------------

struct LogRecord {
  std::string instance_id;
  OptionLabel final_answer = OptionLabel::kInvalid;
  bool correct = false;
  int decided_round = 1;
  FailurePattern pattern = FailurePattern::kNone;
  int score = 0;
  std::map<std::string, int> prompt_versions;
  std::optional<std::string> category;

  bool operator==(const LogRecord&) const = default;
};

inline nlohmann::json to_json(const LogRecord& r) {
  nlohmann::json j = {{"instance_id", r.instance_id},
                      {"final_answer", to_string(r.final_answer)},
                      {"correct", r.correct},
                      {"decided_round", r.decided_round},
                      {"pattern", std::string(to_string(r.pattern))},
                      {"score", r.score},
                      {"prompt_versions", r.prompt_versions}};
  if (r.category) j["category"] = *r.category;
  return j;
}

inline LogRecord log_record_from_json(const nlohmann::json& j) {
  LogRecord r;
  r.instance_id = j.at("instance_id").get<std::string>();
  auto ans = parse_option_label(j.at("final_answer").get<std::string>());
  auto pat = parse_failure_pattern(j.at("pattern").get<std::string>());
  if (!ans || !pat) throw Error(ErrorCode::kSchemaMismatch, "bad label in log record");
  r.final_answer = *ans;
  r.pattern = *pat;
  r.correct = j.at("correct").get<bool>();
  r.decided_round = j.at("decided_round").get<int>();
  r.score = j.at("score").get<int>();
  if (r.score < 0 || r.score > 5) throw Error(ErrorCode::kSchemaMismatch, "score outside 0..5");
  if (j.contains("prompt_versions")) r.prompt_versions = j["prompt_versions"].get<std::map<std::string, int>>();
  if (j.contains("category") && j["category"].is_string()) r.category = j["category"].get<std::string>();
  return r;
}

template <class Record>
class CorruptLog : public Error {
 public:
  CorruptLog(std::size_t line, std::vector<Record> recovered)
      : Error(ErrorCode::kCorruptLine, "unreadable record at line " + std::to_string(line) + " (" +
                                           std::to_string(recovered.size()) + " earlier records recovered)"),
        line_(line),
        recovered_(std::move(recovered)) {}
  std::size_t line() const { return line_; }
  const std::vector<Record>& recovered() const { return recovered_; }

 private:
  std::size_t line_;
  std::vector<Record> recovered_;
};

// Append-only JSONL with a {"schema": ...} first line. One writer per file.
class JsonlLogWriter {
 public:
  explicit JsonlLogWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw Error(ErrorCode::kIo, "cannot open log " + path.string());
    if (fresh) write_line(nlohmann::json{{"schema", kLogSchema}});
  }

  void write_line(const nlohmann::json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

template <class Record>
std::vector<Record> read_jsonl_log(const std::filesystem::path& path,
                                   const std::function<Record(const nlohmann::json&)>& parse) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open log " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchemaMismatch, path.string() + ": missing schema header");
  const auto header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("schema") ||
      header["schema"] != std::string(kLogSchema)) {
    throw Error(ErrorCode::kSchemaMismatch, path.string() + ": expected schema " + std::string(kLogSchema));
  }
  std::vector<Record> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw CorruptLog<Record>(line_no, std::move(out));
    try {
      out.push_back(parse(j));
    } catch (const std::exception&) {
      throw CorruptLog<Record>(line_no, std::move(out));
    }
  }
  return out;
}

inline void append_log(const std::filesystem::path& path, const std::vector<LogRecord>& records) {
  JsonlLogWriter w(path);
  for (const auto& r : records) w.write_line(to_json(r));
}

inline std::vector<LogRecord> read_log(const std::filesystem::path& path) {
  return read_jsonl_log<LogRecord>(path, log_record_from_json);
}

inline void append_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  JsonlLogWriter w(path);
  for (const auto& t : trajectories) w.write_line(to_json(t));
}

inline std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  return read_jsonl_log<Trajectory>(path, trajectory_from_json);
}

// ---- prompt store -----------------------------------------------------------

// <root>/role/<role_id>.v<N>.txt and <root>/aggregator/round<t>.v<N>.txt
class PromptStore {
 public:
  explicit PromptStore(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(const RolePrompt& p) const {
    return root_ / "role" / (p.role_id + ".v" + std::to_string(p.version) + ".txt");
  }
  std::filesystem::path path_for(const AggregatorPrompt& p) const {
    return root_ / "aggregator" / ("round" + std::to_string(p.round_index) + ".v" + std::to_string(p.version) + ".txt");
  }

  void save(const RolePrompt& p) const { write_text(path_for(p), p.text); }
  void save(const AggregatorPrompt& p) const { write_text(path_for(p), p.text); }

  void save_all(const PromptSet& set) const {
    for (const auto& [id, p] : set.roles) save(p);
    for (const auto& a : set.aggregators) save(a);
  }

  // Latest version of every prompt named by the topology.
  PromptSet load_latest(const SystemTopology& topology) const {
    PromptSet set;
    for (const auto& id : topology.role_ids) {
      const int v = latest_version(root_ / "role", id);
      if (v < 0) throw Error(ErrorCode::kConfig, "prompt store has no prompt for role " + id);
      RolePrompt p{id, "", v, v > 0 ? std::optional<int>(v - 1) : std::nullopt};
      p.text = read_text(path_for(p));
      set.roles.emplace(id, std::move(p));
    }
    for (int t = 1; t <= topology.num_rounds; ++t) {
      const int v = latest_version(root_ / "aggregator", "round" + std::to_string(t));
      if (v < 0) throw Error(ErrorCode::kConfig, "prompt store has no aggregator prompt for round " + std::to_string(t));
      AggregatorPrompt p{t, "", v, v > 0 ? std::optional<int>(v - 1) : std::nullopt};
      p.text = read_text(path_for(p));
      set.aggregators.push_back(std::move(p));
    }
    return set;
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  static int latest_version(const std::filesystem::path& dir, const std::string& stem) {
    int best = -1;
    if (!std::filesystem::exists(dir)) return best;
    const std::string prefix = stem + ".v";
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".txt") continue;
      const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 4);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
      best = std::max(best, std::stoi(digits));
    }
    return best;
  }

  static void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out << text;
  }

  static std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::filesystem::path root_;
};

inline constexpr std::string_view kDefaultRoleTemplate =
    "You are the {role} in this debate.\n\nQuestion:\n{question}\n\nOptions:\n{options}\n\n"
    "Shared state from the previous round:\n{state}\n\n"
    "Give your reasoning briefly, then state your answer as a single option letter.";

inline constexpr std::string_view kDefaultAggregatorPrompt =
    "You aggregate one round of a multi-agent debate. Summarize the agents' positions faithfully, "
    "identify the best-supported answer, and end the shared state with that answer as a single option letter.";

// Generic starting prompts, version 0.
inline PromptSet default_prompt_set(const SystemTopology& topology) {
  PromptSet set;
  for (const auto& id : topology.role_ids) {
    std::string text(kDefaultRoleTemplate);
    text.replace(text.find("{role}"), 6, id);
    set.roles.emplace(id, RolePrompt{id, text, 0, std::nullopt});
  }
  for (int t = 1; t <= topology.num_rounds; ++t) {
    set.aggregators.push_back({t, std::string(kDefaultAggregatorPrompt), 0, std::nullopt});
  }
  return set;
}

}  // namespace creditloom
