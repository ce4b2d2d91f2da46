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

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "creditloom.hpp"

namespace creditloom::testing {

inline std::filesystem::path source_dir() { return CREDIT_LOOM_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("credit_loom_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Answers every request through a callback and records what it saw.
class ScriptedPort final : public CompletionPort {
 public:
  using Script = std::function<std::string(const CompletionRequest&, int call_index)>;
  explicit ScriptedPort(Script script) : script_(std::move(script)) {}

  std::string complete(const CompletionRequest& request) override {
    std::lock_guard lock(mutex_);
    seen_.push_back(request);
    return script_(request, static_cast<int>(seen_.size()) - 1);
  }

  std::vector<CompletionRequest> seen() const {
    std::lock_guard lock(mutex_);
    return seen_;
  }
  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return seen_.size();
  }

 private:
  Script script_;
  mutable std::mutex mutex_;
  std::vector<CompletionRequest> seen_;
};

inline TaskInstance make_instance(const std::string& id, OptionLabel gold, std::string question = "Which option?") {
  TaskInstance x;
  x.id = id;
  x.question = std::move(question);
  x.options = {"alpha", "beta", "gamma", "delta"};
  x.gold = gold;
  return x;
}

inline SystemTopology three_by_three() { return {{"a", "b", "c"}, 3}; }

inline SyntheticProfile profile_for(const SystemTopology& topo, const std::vector<double>& competence,
                                    const std::vector<double>& reliability, std::uint64_t seed,
                                    double judge_noise = 0.1) {
  SyntheticProfile p;
  for (std::size_t i = 0; i < topo.role_ids.size(); ++i) p.role_competence[topo.role_ids[i]] = competence.at(i);
  for (std::size_t t = 0; t < reliability.size(); ++t) p.aggregator_reliability[static_cast<int>(t) + 1] = reliability[t];
  p.judge_noise = judge_noise;
  p.seed = seed;
  return p;
}

inline std::vector<TaskInstance> subset(const std::vector<TaskInstance>& all, const std::vector<std::string>& ids) {
  std::vector<TaskInstance> out;
  for (const auto& id : ids) {
    for (const auto& x : all) {
      if (x.id == id) {
        out.push_back(x);
        break;
      }
    }
  }
  return out;
}

// Random printable text mixing option letters, other letters, digits and
// punctuation so that standalone and embedded letters both occur.
inline std::string random_text(std::mt19937_64& gen, std::size_t max_len = 40) {
  static const std::string alphabet = "ABCDabcdEFxyz0123456789 .,;:!?()[]-_'\"\t\n";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(gen), ' ');
  for (auto& c : s) c = alphabet[pick(gen)];
  return s;
}

}  // namespace creditloom::testing
