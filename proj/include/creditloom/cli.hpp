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

// `credit_loom` command line. Exit codes: 0 success, 2 configuration error,
// 3 gateway error, 4 data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "creditloom/bcd_optimizer.hpp"
#include "creditloom/config.hpp"
#include "creditloom/datastore.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/http_gateway.hpp"
#include "creditloom/prompt_assets.hpp"
#include "creditloom/replay_cache.hpp"
#include "creditloom/report.hpp"
#include "creditloom/synthetic.hpp"

namespace creditloom::cli {

enum class Mode { kLive, kReplay, kSynthetic };

inline Mode parse_mode(const std::string& s) {
  if (s == "live") return Mode::kLive;
  if (s == "replay") return Mode::kReplay;
  if (s == "synthetic") return Mode::kSynthetic;
  throw Error(ErrorCode::kConfig, "--mode must be live, replay or synthetic");
}

// Owns the gateway stack for one command: backend, optional cache, meter.
class GatewayStack {
 public:
  GatewayStack(Mode mode, const AppConfig& config, std::uint64_t seed, const std::vector<TaskInstance>& instances,
               const std::filesystem::path& out_dir) {
    std::filesystem::path cache_path = config.gateway.cache_path;
    if (!cache_path.empty() && cache_path.is_relative()) cache_path = out_dir / cache_path;
    CompletionPort* backend = nullptr;
    switch (mode) {
      case Mode::kSynthetic:
        synthetic_ = std::make_unique<SyntheticGateway>(config.synthetic_profile(seed), instances);
        backend = synthetic_.get();
        break;
      case Mode::kLive: {
        LiveGatewayOptions opts;
        opts.base_url = config.gateway.base_url;
        opts.model = config.gateway.model;
        opts.api_key = api_key_from_env();
        opts.max_retries = config.gateway.max_retries;
        opts.initial_backoff = std::chrono::milliseconds(config.gateway.initial_backoff_ms);
        opts.requests_per_second = config.gateway.requests_per_second;
        transport_ = std::make_unique<HttplibTransport>();
        live_ = std::make_unique<LiveGateway>(opts, *transport_);
        backend = live_.get();
        break;
      }
      case Mode::kReplay:
        break;
    }
    if (mode == Mode::kReplay) {
      if (cache_path.empty()) throw Error(ErrorCode::kConfig, "replay mode needs [gateway] cache_path");
      cache_ = std::make_unique<ReplayCache>(cache_path, CacheMode::kReplayStrict, nullptr);
    } else if (!cache_path.empty()) {
      const CacheMode cm = config.gateway.cache_mode == CacheMode::kReplayStrict ? CacheMode::kRecord
                                                                                : config.gateway.cache_mode;
      cache_ = std::make_unique<ReplayCache>(cache_path, cm, backend);
    }
    CompletionPort& inner = cache_ ? static_cast<CompletionPort&>(*cache_) : *backend;
    const auto budget =
        config.gateway.max_calls > 0 ? std::optional<std::uint64_t>(config.gateway.max_calls) : std::nullopt;
    meter_ = std::make_unique<MeteredPort>(inner, budget);
  }

  CompletionPort& port() { return *meter_; }
  const MeteredPort& meter() const { return *meter_; }

 private:
  std::unique_ptr<SyntheticGateway> synthetic_;
  std::unique_ptr<HttplibTransport> transport_;
  std::unique_ptr<LiveGateway> live_;
  std::unique_ptr<ReplayCache> cache_;
  std::unique_ptr<MeteredPort> meter_;
};

struct CommonArgs {
  std::string config;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::string mode = "synthetic";
  std::string out = "out";
};

inline AppConfig load_app_config(const CommonArgs& a) {
  return a.config.empty() ? AppConfig{} : load_config(a.config);
}

inline std::vector<TaskInstance> load_or_synthesize(const CommonArgs& a, const AppConfig& config, std::uint64_t seed) {
  if (!a.dataset.empty()) return load_dataset(a.dataset);
  // Replay of a synthetic run regenerates the same instances from the seed.
  if (parse_mode(a.mode) == Mode::kLive) throw Error(ErrorCode::kConfig, "--dataset is required in live mode");
  return make_synthetic_instances(config.synthetic.instances, seed);
}

inline PromptAssets load_assets(const AppConfig& config) {
  return std::filesystem::exists(config.data.assets_dir) ? PromptAssets::load(config.data.assets_dir) : PromptAssets{};
}

inline std::vector<TaskInstance> select_instances(const std::vector<TaskInstance>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const TaskInstance*> by_id;
  for (const auto& x : all) by_id.emplace(x.id, &x);
  std::vector<TaskInstance> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kIdMismatch, "instance " + id + " is not in the dataset");
    out.push_back(*it->second);
  }
  return out;
}

inline std::vector<std::string> parse_id_list(const std::string& spec) {
  std::string text = spec;
  if (!spec.empty() && spec[0] == '@') {
    std::ifstream in(spec.substr(1));
    if (!in) throw Error(ErrorCode::kIo, "cannot read id list " + spec.substr(1));
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::vector<std::string> ids;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',' || c == '\n' || c == ' ' || c == '\r' || c == '\t') {
      if (!cur.empty()) ids.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return ids;
}

inline PromptSet initial_prompts(const AppConfig& config, const std::string& prompts_dir) {
  if (prompts_dir.empty()) return default_prompt_set(config.topology);
  return PromptStore(prompts_dir).load_latest(config.topology);
}

struct Evaluation {
  std::vector<Trajectory> trajectories;
  std::vector<LogRecord> records;
};

inline Evaluation evaluate(const std::vector<TaskInstance>& instances, const AppConfig& config, const PromptSet& prompts,
                           CompletionPort& gateway, const PromptAssets& assets) {
  struct Item {
    Trajectory trajectory;
    LogRecord record;
  };
  auto items = parallel_map<Item>(instances.size(), config.optimizer.workers, [&](std::size_t i) {
    Item it;
    it.trajectory = run_trajectory(instances[i], config.topology, prompts, gateway, config.optimizer.protocol);
    it.record = make_log_record(it.trajectory, instances[i], prompts, gateway, assets, config.optimizer.critic);
    return it;
  });
  Evaluation e;
  for (auto& it : items) {
    e.trajectories.push_back(std::move(it.trajectory));
    e.records.push_back(std::move(it.record));
  }
  return e;
}

inline void print_calls(const MeteredPort& meter, std::ostream& os) {
  os << "gateway calls: " << meter.calls();
  for (auto tag : kAllCallTags) {
    if (const auto n = meter.calls(tag)) os << "  " << to_string(tag) << "=" << n;
  }
  os << "\n";
}

// ---- commands ---------------------------------------------------------------

inline int cmd_ingest(const CommonArgs& a) {
  if (a.dataset.empty()) throw Error(ErrorCode::kConfig, "ingest needs --dataset");
  const auto instances = load_dataset(a.dataset);
  const auto path = std::filesystem::path(a.out) / "dataset.jsonl";
  write_dataset(path, instances);
  std::cout << "ingested " << instances.size() << " instances -> " << path.string() << "\n";
  return 0;
}

inline int cmd_split(const CommonArgs& a) {
  const AppConfig config = load_app_config(a);
  const std::uint64_t seed = a.seed.value_or(config.data.seed);
  const auto instances = load_or_synthesize(a, config, seed);
  const auto split = make_splits(instances, seed, config.data.optimization_size);
  if (split.warning) std::cerr << "warning: " << *split.warning << "\n";
  const auto path = std::filesystem::path(a.out) / "split.json";
  write_json_file(path, to_json(split));
  std::cout << "optimization " << split.optimization_ids.size() << ", test " << split.test_ids.size() << " -> "
            << path.string() << "\n";
  return 0;
}

inline int cmd_run(const CommonArgs& a, const std::string& split_path, const std::string& prompts_dir,
                   const std::string& subset) {
  const AppConfig config = load_app_config(a);
  const std::uint64_t seed = a.seed.value_or(config.data.seed);
  const auto all = load_or_synthesize(a, config, seed);
  const DatasetSplit split = split_path.empty() ? make_splits(all, seed, config.data.optimization_size)
                                                : split_from_json(read_json_file(split_path));
  std::vector<std::string> ids;
  if (subset == "test") ids = split.test_ids;
  else if (subset == "optimization") ids = split.optimization_ids;
  else if (subset == "all") for (const auto& x : all) ids.push_back(x.id);
  else throw Error(ErrorCode::kConfig, "--subset must be test, optimization or all");
  const auto instances = select_instances(all, ids);
  const std::filesystem::path out(a.out);
  GatewayStack gw(parse_mode(a.mode), config, seed, all, out);
  const PromptAssets assets = load_assets(config);
  const PromptSet prompts = initial_prompts(config, prompts_dir);
  const Evaluation e = evaluate(instances, config, prompts, gw.port(), assets);
  std::filesystem::remove(out / "trajectories.jsonl");
  std::filesystem::remove(out / "eval_log.jsonl");
  append_trajectories(out / "trajectories.jsonl", e.trajectories);
  append_log(out / "eval_log.jsonl", e.records);
  std::cout << render_summary(report_summary(e.records));
  print_calls(gw.meter(), std::cout);
  return 0;
}

inline int cmd_optimize(CommonArgs a, const std::string& manifest_path, const std::string& ids_spec,
                        const std::string& prompts_dir) {
  AppConfig config;
  std::uint64_t seed = 0;
  if (!manifest_path.empty()) {
    const RunManifest m = manifest_from_json(read_json_file(manifest_path));
    config = config_from_json(m.config.at("settings"));
    seed = m.seeds.empty() ? config.data.seed : m.seeds.front();
    if (a.dataset.empty()) a.dataset = m.config.value("dataset", std::string());
  } else {
    config = load_app_config(a);
    seed = a.seed.value_or(config.data.seed);
  }
  const auto all = load_or_synthesize(a, config, seed);
  const DatasetSplit split = make_splits(all, seed, config.data.optimization_size);
  if (split.warning) std::cerr << "warning: " << *split.warning << "\n";
  const std::vector<std::string> ids = ids_spec.empty() ? split.optimization_ids : parse_id_list(ids_spec);
  require_optimization_ids(split, ids);
  const auto instances = select_instances(all, ids);

  const std::filesystem::path out(a.out);
  GatewayStack gw(parse_mode(a.mode), config, seed, all, out);
  const PromptAssets assets = load_assets(config);
  const PromptSet initial = initial_prompts(config, prompts_dir);
  const PromptStore store(out / "prompts");
  store.save_all(initial);

  BcdContext ctx{config.topology, instances, split, gw.port(), assets, config.optimizer, &store, out / "logs"};
  RunManifest manifest;
  manifest.config = {{"settings", to_json(config)}, {"dataset", a.dataset}, {"ids", ids}};
  manifest.seeds = {seed};
  std::filesystem::remove_all(out / "logs");
  OptimizationResult result;
  try {
    result = run_optimization(ctx, initial, manifest);
  } catch (const BudgetExhausted& e) {
    store.save_all(e.best());
    throw;
  }
  write_json_file(out / "manifest.json", to_json(result.manifest));
  write_json_file(out / "prompts.json", to_json(result.prompts));
  TextTable table({"Iteration", "Phase", "Targets", "Accuracy %"});
  for (const auto& r : result.manifest.history) {
    table.add_row({std::to_string(r.iteration), r.phase, r.targets.empty() ? "-" : join(r.targets, ","),
                   format_fixed(r.accuracy, 1)});
  }
  std::cout << table.render() << "stop: " << result.manifest.stop_reason << ", iterations "
            << result.manifest.iterations << "\n";
  print_calls(gw.meter(), std::cout);
  return 0;
}

inline int cmd_report(const std::string& log_path) {
  std::cout << render_summary(report_summary(read_log(log_path)));
  return 0;
}

inline int cmd_shift(const std::string& before, const std::string& after) {
  std::cout << render_shift(report_shift(read_log(before), read_log(after)));
  return 0;
}

inline int cmd_export(const std::string& manifest_path, const std::string& out) {
  const RunManifest m = manifest_from_json(read_json_file(manifest_path));
  const auto files = export_series(m, out);
  std::cout << files.accuracy.string() << "\n" << files.credits.string() << "\n";
  return 0;
}

// Synthetic end-to-end: baseline vs optimized held-out accuracy per seed.
inline int cmd_simulate(const CommonArgs& a, int num_seeds) {
  const AppConfig config = load_app_config(a);
  const std::uint64_t first = a.seed.value_or(config.data.seed);
  const PromptAssets assets = load_assets(config);
  TextTable table({"Seed", "Baseline %", "Optimized %", "Gain"});
  std::vector<double> base_acc;
  std::vector<double> opt_acc;
  nlohmann::json rows = nlohmann::json::array();
  for (int s = 0; s < num_seeds; ++s) {
    const std::uint64_t seed = first + static_cast<std::uint64_t>(s);
    const auto all = make_synthetic_instances(config.synthetic.instances, seed);
    const auto split = make_splits(all, seed, config.data.optimization_size);
    SyntheticGateway world(config.synthetic_profile(seed), all);
    const auto opt = select_instances(all, split.optimization_ids);
    const auto test = select_instances(all, split.test_ids);
    const PromptSet initial = default_prompt_set(config.topology);
    BcdContext ctx{config.topology, opt, split, world, assets, config.optimizer, nullptr, std::nullopt};
    const auto result = run_optimization(ctx, initial);
    const double before = accuracy_percent(rollout(test, config.topology, initial, world, assets, config.optimizer, false));
    const double after =
        accuracy_percent(rollout(test, config.topology, result.prompts, world, assets, config.optimizer, false));
    base_acc.push_back(before);
    opt_acc.push_back(after);
    table.add_row({std::to_string(seed), format_fixed(before, 1), format_fixed(after, 1), format_fixed(after - before, 1)});
    rows.push_back({{"seed", seed}, {"baseline", before}, {"optimized", after}, {"iterations", result.manifest.iterations}});
  }
  const auto b = mean_std(base_acc);
  const auto o = mean_std(opt_acc);
  table.add_row({"mean ± std", format_fixed(b.mean, 1) + " ± " + format_fixed(b.std, 1),
                 format_fixed(o.mean, 1) + " ± " + format_fixed(o.std, 1), format_fixed(o.mean - b.mean, 1)});
  std::cout << table.render();
  write_json_file(std::filesystem::path(a.out) / "simulation.json", {{"runs", rows}});
  return 0;
}

// ---- entry ------------------------------------------------------------------

inline int run_cli(int argc, char** argv) {
  CLI::App app{"credit_loom: multi-agent debate orchestration with credit-guided prompt optimization"};
  app.require_subcommand(1);
  CommonArgs common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "INI configuration file");
    sub->add_option("--dataset", common.dataset, "dataset JSONL");
    sub->add_option("--seed", common.seed, "seed for splits and the synthetic world");
    sub->add_option("--mode", common.mode, "live, replay or synthetic")->check(CLI::IsMember({"live", "replay", "synthetic"}));
    sub->add_option("--out", common.out, "output directory");
  };

  auto* ingest = app.add_subcommand("ingest", "validate and normalize a dataset");
  add_common(ingest);
  auto* split = app.add_subcommand("split", "write the optimization/test split");
  add_common(split);

  std::string split_path;
  std::string prompts_dir;
  std::string subset = "test";
  auto* run = app.add_subcommand("run", "run the debate and write trajectory and evaluation logs");
  add_common(run);
  run->add_option("--split", split_path, "split.json written by `split`");
  run->add_option("--prompts", prompts_dir, "prompt store directory (latest versions are used)");
  run->add_option("--subset", subset, "test, optimization or all");

  std::string manifest_path;
  std::string ids_spec;
  auto* optimize = app.add_subcommand("optimize", "run block coordinate descent over the prompts");
  add_common(optimize);
  optimize->add_option("--manifest", manifest_path, "rerun from a previous manifest");
  optimize->add_option("--ids", ids_spec, "comma-separated ids or @file restricting the optimization instances");
  optimize->add_option("--prompts", prompts_dir, "prompt store with the starting prompts");

  std::string log_path;
  auto* report = app.add_subcommand("report", "summary tables for an evaluation log");
  report->add_option("--log", log_path, "evaluation log JSONL")->required();

  std::string before;
  std::string after;
  auto* shift = app.add_subcommand("shift", "prediction shifts between two evaluation logs");
  shift->add_option("--before", before)->required();
  shift->add_option("--after", after)->required();

  int num_seeds = 1;
  auto* simulate = app.add_subcommand("simulate", "baseline vs optimized accuracy in the synthetic world");
  add_common(simulate);
  simulate->add_option("--seeds", num_seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "write accuracy and credit series as CSV");
  exp->add_option("--manifest", manifest_path, "manifest.json")->required();
  exp->add_option("--out", common.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(common);
    if (*split) return cmd_split(common);
    if (*run) return cmd_run(common, split_path, prompts_dir, subset);
    if (*optimize) return cmd_optimize(common, manifest_path, ids_spec, prompts_dir);
    if (*report) return cmd_report(log_path);
    if (*shift) return cmd_shift(before, after);
    if (*simulate) return cmd_simulate(common, num_seeds);
    if (*exp) return cmd_export(manifest_path, common.out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace creditloom::cli
