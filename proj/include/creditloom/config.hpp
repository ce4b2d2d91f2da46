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

// Flat INI configuration. Every key has a default; unknown sections or keys
// are rejected so typos surface as configuration errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "creditloom/bcd_optimizer.hpp"
#include "creditloom/credit_ledger.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/protocol.hpp"
#include "creditloom/replay_cache.hpp"
#include "creditloom/synthetic.hpp"

namespace creditloom {

struct GatewayConfig {
  std::string base_url = "http://localhost:8000/v1";
  std::string model = "default";
  int max_retries = 2;
  int initial_backoff_ms = 500;
  double requests_per_second = 0.0;
  std::string cache_path = "cache/completions.jsonl";
  CacheMode cache_mode = CacheMode::kRecord;
  std::uint64_t max_calls = 0;  // 0: unlimited
};

struct DataConfig {
  std::uint64_t seed = 2026;
  std::size_t optimization_size = kOptimizationSetSize;
  std::string assets_dir = "prompts/assets";
  std::string prompt_store = "prompts/store";
};

struct SyntheticConfig {
  std::vector<double> competence{0.9, 0.9, 0.3};     // per role, topology order
  std::vector<double> reliability{0.95, 0.95, 0.5};  // per round
  std::vector<std::optional<double>> improved_competence{std::nullopt, std::nullopt, 0.8};
  std::vector<std::optional<double>> improved_reliability{std::nullopt, std::nullopt, 0.9};
  double judge_noise = 0.1;
  std::size_t instances = 500;
};

struct AppConfig {
  SystemTopology topology{{"analyst", "clinician", "skeptic"}, 3};
  OptimizerConfig optimizer;  // includes the credit and protocol settings
  GatewayConfig gateway;
  DataConfig data;
  SyntheticConfig synthetic;

  SyntheticProfile synthetic_profile(std::uint64_t seed) const {
    const auto n = topology.role_ids.size();
    const auto r = static_cast<std::size_t>(topology.num_rounds);
    if (synthetic.competence.size() != n || synthetic.improved_competence.size() > n) {
      throw Error(ErrorCode::kConfig, "synthetic competence needs one value per role");
    }
    if (synthetic.reliability.size() != r || synthetic.improved_reliability.size() > r) {
      throw Error(ErrorCode::kConfig, "synthetic reliability needs one value per round");
    }
    SyntheticProfile p;
    for (std::size_t i = 0; i < n; ++i) {
      p.role_competence[topology.role_ids[i]] = synthetic.competence[i];
      if (i < synthetic.improved_competence.size() && synthetic.improved_competence[i]) {
        p.improved_competence[topology.role_ids[i]] = *synthetic.improved_competence[i];
      }
    }
    for (std::size_t t = 0; t < r; ++t) {
      p.aggregator_reliability[static_cast<int>(t) + 1] = synthetic.reliability[t];
      if (t < synthetic.improved_reliability.size() && synthetic.improved_reliability[t]) {
        p.improved_reliability[static_cast<int>(t) + 1] = *synthetic.improved_reliability[t];
      }
    }
    p.judge_noise = synthetic.judge_noise;
    p.seed = seed;
    p.validate();
    return p;
  }

  void validate() const {
    topology.validate();
    optimizer.validate();
    if (gateway.max_retries < 0) throw Error(ErrorCode::kRangeViolation, "max_retries must be >= 0");
    if (gateway.initial_backoff_ms < 0) throw Error(ErrorCode::kRangeViolation, "initial_backoff_ms must be >= 0");
    if (data.optimization_size < 1) throw Error(ErrorCode::kRangeViolation, "optimization_size must be >= 1");
    synthetic_profile(0);
  }
};

using IniMap = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.emplace_back(trim(item));
  if (!s.empty() && s.back() == ',') out.emplace_back();
  return out;
}

inline std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(15);
  ss << v;
  return ss.str();
}

template <class T, class F>
std::string join_list(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

class IniReader {
 public:
  explicit IniReader(IniMap map) : map_(std::move(map)) {}

  std::optional<std::string> take(const std::string& section, const std::string& key) {
    auto s = map_.find(section);
    if (s == map_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    std::string v = k->second;
    s->second.erase(k);
    return v;
  }

  template <class T, class Parse>
  void read(const std::string& section, const std::string& key, T& out, Parse parse) {
    if (auto v = take(section, key)) {
      try {
        out = parse(*v);
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfig, "[" + section + "] " + key + ": cannot parse '" + *v + "'");
      }
    }
  }

  void require_consumed() const {
    for (const auto& [section, keys] : map_) {
      if (!keys.empty()) {
        throw Error(ErrorCode::kConfig, "unknown configuration key [" + section + "] " + keys.begin()->first);
      }
    }
  }

 private:
  IniMap map_;
};

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline long long parse_int(const std::string& s) {
  std::size_t pos = 0;
  const long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument(s);
}

}  // namespace detail

inline const std::vector<std::string>& config_sections() {
  static const std::vector<std::string> kSections{"topology", "credit",    "optimizer", "protocol",
                                                  "gateway",  "synthetic", "data"};
  return kSections;
}

inline IniMap to_ini_map(const AppConfig& c) {
  using detail::fmt_double;
  const auto& o = c.optimizer;
  IniMap m;
  m["topology"]["roles"] = detail::join_list(c.topology.role_ids, [](const std::string& s) { return s; });
  m["topology"]["rounds"] = std::to_string(c.topology.num_rounds);

  m["credit"]["lambda"] = fmt_double(o.credit.lambda);
  m["credit"]["ema_rate"] = fmt_double(o.credit.ema_rate);
  m["credit"]["threshold"] = fmt_double(o.credit.threshold);
  m["credit"]["buffer_min"] = std::to_string(o.credit.buffer_min);
  m["credit"]["bottom_k"] = std::to_string(o.credit.bottom_k);
  m["credit"]["ema_variant"] = o.credit.ema_variant == EmaVariant::kFailureGated ? "failure_gated" : "symmetric";
  m["credit"]["role_selection"] = o.credit.role_selection == RoleSelection::kBottomK ? "bottom_k" : "threshold";
  m["credit"]["role_threshold"] = fmt_double(o.credit.role_threshold);

  m["optimizer"]["k_max"] = std::to_string(o.k_max);
  m["optimizer"]["patience"] = std::to_string(o.patience);
  m["optimizer"]["epsilon"] = fmt_double(o.epsilon);
  m["optimizer"]["phase_b_reuse"] = std::string(to_string(o.reuse));
  m["optimizer"]["workers"] = std::to_string(o.workers);
  m["optimizer"]["critic_all_rounds"] = o.critic_all_rounds ? "true" : "false";
  m["optimizer"]["max_exemplars"] = std::to_string(o.max_exemplars);

  m["protocol"]["role_temperature"] = fmt_double(o.protocol.role_temperature);
  m["protocol"]["aggregator_temperature"] = fmt_double(o.protocol.aggregator_temperature);
  m["protocol"]["max_tokens"] = std::to_string(o.protocol.max_tokens);
  m["protocol"]["decision"] = o.protocol.decision == DecisionMode::kExtract ? "extract" : "model";
  m["protocol"]["critic_max_tokens"] = std::to_string(o.critic.max_tokens);

  m["gateway"]["base_url"] = c.gateway.base_url;
  m["gateway"]["model"] = c.gateway.model;
  m["gateway"]["max_retries"] = std::to_string(c.gateway.max_retries);
  m["gateway"]["initial_backoff_ms"] = std::to_string(c.gateway.initial_backoff_ms);
  m["gateway"]["requests_per_second"] = fmt_double(c.gateway.requests_per_second);
  m["gateway"]["cache_path"] = c.gateway.cache_path;
  m["gateway"]["cache_mode"] = std::string(to_string(c.gateway.cache_mode));
  m["gateway"]["max_calls"] = std::to_string(c.gateway.max_calls);

  auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  m["synthetic"]["competence"] = detail::join_list(c.synthetic.competence, fmt_double);
  m["synthetic"]["reliability"] = detail::join_list(c.synthetic.reliability, fmt_double);
  m["synthetic"]["improved_competence"] = detail::join_list(c.synthetic.improved_competence, opt);
  m["synthetic"]["improved_reliability"] = detail::join_list(c.synthetic.improved_reliability, opt);
  m["synthetic"]["judge_noise"] = fmt_double(c.synthetic.judge_noise);
  m["synthetic"]["instances"] = std::to_string(c.synthetic.instances);

  m["data"]["seed"] = std::to_string(c.data.seed);
  m["data"]["optimization_size"] = std::to_string(c.data.optimization_size);
  m["data"]["assets_dir"] = c.data.assets_dir;
  m["data"]["prompt_store"] = c.data.prompt_store;
  return m;
}

inline AppConfig from_ini_map(IniMap map) {
  using namespace detail;
  for (const auto& [section, keys] : map) {
    if (std::find(config_sections().begin(), config_sections().end(), section) == config_sections().end()) {
      throw Error(ErrorCode::kConfig, "unknown configuration section [" + section + "]");
    }
  }
  AppConfig c;
  auto& o = c.optimizer;
  IniReader r(std::move(map));
  auto to_int = [](const std::string& s) { return static_cast<int>(parse_int(s)); };
  auto to_u64 = [](const std::string& s) {
    const auto v = parse_int(s);
    if (v < 0) throw std::invalid_argument(s);
    return static_cast<std::uint64_t>(v);
  };
  auto to_size = [&](const std::string& s) { return static_cast<std::size_t>(to_u64(s)); };
  auto to_str = [](const std::string& s) { return s; };
  auto doubles = [](const std::string& s) {
    std::vector<double> out;
    for (const auto& x : split_list(s)) out.push_back(parse_double(x));
    return out;
  };
  auto optional_doubles = [](const std::string& s) {
    std::vector<std::optional<double>> out;
    for (const auto& x : split_list(s)) out.push_back(x.empty() ? std::nullopt : std::optional<double>(parse_double(x)));
    return out;
  };

  r.read("topology", "roles", c.topology.role_ids, split_list);
  r.read("topology", "rounds", c.topology.num_rounds, to_int);

  r.read("credit", "lambda", o.credit.lambda, parse_double);
  r.read("credit", "ema_rate", o.credit.ema_rate, parse_double);
  r.read("credit", "threshold", o.credit.threshold, parse_double);
  r.read("credit", "buffer_min", o.credit.buffer_min, to_int);
  r.read("credit", "bottom_k", o.credit.bottom_k, to_int);
  r.read("credit", "ema_variant", o.credit.ema_variant, [](const std::string& s) {
    if (s == "failure_gated") return EmaVariant::kFailureGated;
    if (s == "symmetric") return EmaVariant::kSymmetric;
    throw Error(ErrorCode::kConfig, "ema_variant must be failure_gated or symmetric");
  });
  r.read("credit", "role_selection", o.credit.role_selection, [](const std::string& s) {
    if (s == "bottom_k") return RoleSelection::kBottomK;
    if (s == "threshold") return RoleSelection::kThreshold;
    throw Error(ErrorCode::kConfig, "role_selection must be bottom_k or threshold");
  });
  r.read("credit", "role_threshold", o.credit.role_threshold, parse_double);

  r.read("optimizer", "k_max", o.k_max, to_int);
  r.read("optimizer", "patience", o.patience, to_int);
  r.read("optimizer", "epsilon", o.epsilon, parse_double);
  r.read("optimizer", "phase_b_reuse", o.reuse, [](const std::string& s) { return parse_reuse_policy(s); });
  r.read("optimizer", "workers", o.workers, to_int);
  r.read("optimizer", "critic_all_rounds", o.critic_all_rounds, parse_bool);
  r.read("optimizer", "max_exemplars", o.max_exemplars, to_size);

  r.read("protocol", "role_temperature", o.protocol.role_temperature, parse_double);
  r.read("protocol", "aggregator_temperature", o.protocol.aggregator_temperature, parse_double);
  r.read("protocol", "max_tokens", o.protocol.max_tokens, to_int);
  r.read("protocol", "decision", o.protocol.decision, [](const std::string& s) {
    if (s == "extract") return DecisionMode::kExtract;
    if (s == "model") return DecisionMode::kModel;
    throw Error(ErrorCode::kConfig, "decision must be extract or model");
  });
  r.read("protocol", "critic_max_tokens", o.critic.max_tokens, to_int);

  r.read("gateway", "base_url", c.gateway.base_url, to_str);
  r.read("gateway", "model", c.gateway.model, to_str);
  r.read("gateway", "max_retries", c.gateway.max_retries, to_int);
  r.read("gateway", "initial_backoff_ms", c.gateway.initial_backoff_ms, to_int);
  r.read("gateway", "requests_per_second", c.gateway.requests_per_second, parse_double);
  r.read("gateway", "cache_path", c.gateway.cache_path, to_str);
  r.read("gateway", "cache_mode", c.gateway.cache_mode, [](const std::string& s) {
    auto m = parse_cache_mode(s);
    if (!m) throw Error(ErrorCode::kConfig, "cache_mode must be record, replay-strict or replay-fallthrough");
    return *m;
  });
  r.read("gateway", "max_calls", c.gateway.max_calls, to_u64);

  r.read("synthetic", "competence", c.synthetic.competence, doubles);
  r.read("synthetic", "reliability", c.synthetic.reliability, doubles);
  r.read("synthetic", "improved_competence", c.synthetic.improved_competence, optional_doubles);
  r.read("synthetic", "improved_reliability", c.synthetic.improved_reliability, optional_doubles);
  r.read("synthetic", "judge_noise", c.synthetic.judge_noise, parse_double);
  r.read("synthetic", "instances", c.synthetic.instances, to_size);

  r.read("data", "seed", c.data.seed, to_u64);
  r.read("data", "optimization_size", c.data.optimization_size, to_size);
  r.read("data", "assets_dir", c.data.assets_dir, to_str);
  r.read("data", "prompt_store", c.data.prompt_store, to_str);

  r.require_consumed();
  c.validate();
  return c;
}

inline IniMap read_ini(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  IniMap out;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw Error(ErrorCode::kConfig, "key '" + section + "' outside of any section");
    }
    auto& dst = out[section];
    for (const auto& [key, value] : keys) dst[key] = std::string(detail::trim(value.data()));
  }
  return out;
}

inline AppConfig load_config(const std::filesystem::path& path) { return from_ini_map(read_ini(path)); }

inline std::string render_ini(const AppConfig& c) {
  std::string out;
  const auto map = to_ini_map(c);
  for (const auto& section : config_sections()) {
    out += (out.empty() ? "" : "\n") + std::string("[") + section + "]\n";
    for (const auto& [key, value] : map.at(section)) out += key + " = " + value + "\n";
  }
  return out;
}

inline nlohmann::json to_json(const AppConfig& c) { return to_ini_map(c); }

inline AppConfig config_from_json(const nlohmann::json& j) {
  try {
    return from_ini_map(j.get<IniMap>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config snapshot: ") + e.what());
  }
}

}  // namespace creditloom
