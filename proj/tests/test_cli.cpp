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

#include <gtest/gtest.h>

#include "creditloom/cli.hpp"
#include "support.hpp"

namespace creditloom {
namespace {

using testing::TempDir;

const char* kSmallWorld =
    "[synthetic]\ninstances = 40\n"
    "[data]\noptimization_size = 20\n"
    "[optimizer]\nk_max = 1\nworkers = 2\n";

// Runs the CLI with captured stdout/stderr; returns the exit status.
int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "credit_loom");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data());
  const std::string o = ::testing::internal::GetCapturedStdout();
  const std::string e = ::testing::internal::GetCapturedStderr();
  if (out) *out = o + e;
  return code;
}

TEST(Config, ShippedExampleEqualsDefaults) {
  const auto path = testing::source_dir() / "config" / "example.ini";
  EXPECT_EQ(to_json(load_config(path)), to_json(AppConfig{}));
  EXPECT_EQ(testing::slurp(path), render_ini(AppConfig{}));
}

TEST(Config, JsonSnapshotRoundTrips) {
  AppConfig c;
  c.topology = {{"x", "y"}, 2};
  c.synthetic.competence = {0.5, 0.6};
  c.synthetic.reliability = {0.7, 0.8};
  c.synthetic.improved_competence = {std::nullopt, 0.9};
  c.synthetic.improved_reliability = {0.95, std::nullopt};
  c.optimizer.credit.ema_variant = EmaVariant::kSymmetric;
  c.optimizer.reuse = ReusePolicy::kNever;
  c.gateway.cache_mode = CacheMode::kReplayFallthrough;
  c.data.seed = 77;
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, PartialFileKeepsDefaults) {
  TempDir dir;
  testing::spit(dir / "c.ini", kSmallWorld);
  const auto c = load_config(dir / "c.ini");
  EXPECT_EQ(c.synthetic.instances, 40u);
  EXPECT_EQ(c.optimizer.k_max, 1);
  EXPECT_EQ(c.optimizer.credit.threshold, 0.7);
  EXPECT_EQ(c.topology.num_rounds, 3);
}

TEST(Config, RejectsUnknownKeysSectionsAndBadValues) {
  TempDir dir;
  const std::vector<std::string> bad = {
      "[credit]\nlamda = 0.5\n",       "[extras]\nx = 1\n",           "[credit]\nlambda = 2\n",
      "[credit]\nlambda = abc\n",      "[optimizer]\npatience = 0\n", "[optimizer]\nphase_b_reuse = maybe\n",
      "[synthetic]\ncompetence = 0.5\n", "[gateway]\ncache_mode = sometimes\n",
  };
  for (std::size_t i = 0; i < bad.size(); ++i) {
    const auto path = dir / ("bad" + std::to_string(i) + ".ini");
    testing::spit(path, bad[i]);
    try {
      load_config(path).validate();
      ADD_FAILURE() << bad[i];
    } catch (const Error& e) {
      EXPECT_EQ(e.exit_code(), 2) << bad[i];
    }
    EXPECT_EQ(cli({"split", "--config", path.string(), "--out", (dir / "o").string()}), 2) << bad[i];
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}), 2);
  EXPECT_EQ(cli({"frobnicate"}), 2);
  EXPECT_EQ(cli({"run", "--mode", "psychic"}), 2);
  EXPECT_EQ(cli({"report"}), 2);
  EXPECT_EQ(cli({"--help"}), 0);
  EXPECT_EQ(cli({"run", "--mode", "live", "--out", "unused"}), 2);
}

TEST(Cli, ParseIdList) {
  TempDir dir;
  EXPECT_EQ(cli::parse_id_list(" a, b ,,c"), (std::vector<std::string>{"a", "b", "c"}));
  testing::spit(dir / "ids.txt", "x\ny,z\n");
  EXPECT_EQ(cli::parse_id_list("@" + (dir / "ids.txt").string()), (std::vector<std::string>{"x", "y", "z"}));
}

TEST(Cli, OptimizeOverTestIdIsADataError) {
  TempDir dir;
  testing::spit(dir / "c.ini", kSmallWorld);
  const auto out = (dir / "o").string();
  ASSERT_EQ(cli({"split", "--config", (dir / "c.ini").string(), "--out", out}), 0);
  const auto split = split_from_json(read_json_file(dir / "o/split.json"));
  std::string msg;
  EXPECT_EQ(cli({"optimize", "--config", (dir / "c.ini").string(), "--out", out, "--ids",
                 split.optimization_ids[0] + "," + split.test_ids[0]},
                &msg),
            4);
  EXPECT_NE(msg.find("TestExposure"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(dir / "o/manifest.json"));
}

TEST(Cli, ReplayWithoutRecordingIsAGatewayError) {
  TempDir dir;
  testing::spit(dir / "c.ini", kSmallWorld);
  EXPECT_EQ(cli({"run", "--mode", "replay", "--config", (dir / "c.ini").string(), "--out", (dir / "o").string()}), 3);
}

TEST(Cli, MissingDatasetIsADataError) {
  TempDir dir;
  EXPECT_EQ(cli({"ingest", "--dataset", (dir / "nope.jsonl").string(), "--out", (dir / "o").string()}), 4);
  EXPECT_EQ(cli({"report", "--log", (dir / "nope.jsonl").string()}), 4);
}

TEST(Cli, EndToEndSyntheticWorkflow) {
  TempDir dir;
  testing::spit(dir / "c.ini", kSmallWorld);
  const auto cfg = (dir / "c.ini").string();
  const auto base = (dir / "base").string();
  const auto opt = (dir / "opt").string();
  std::string text;
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", base}, &text), 0) << text;
  EXPECT_NE(text.find("Mean score"), std::string::npos);
  ASSERT_EQ(cli({"optimize", "--config", cfg, "--out", opt}, &text), 0) << text;
  EXPECT_NE(text.find("stop: "), std::string::npos);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", opt, "--prompts", opt + "/prompts"}, &text), 0) << text;
  ASSERT_EQ(cli({"report", "--log", opt + "/eval_log.jsonl"}, &text), 0);
  ASSERT_EQ(cli({"shift", "--before", base + "/eval_log.jsonl", "--after", opt + "/eval_log.jsonl"}, &text), 0);
  EXPECT_NE(text.find("✓→✓"), std::string::npos);
  ASSERT_EQ(cli({"export", "--manifest", opt + "/manifest.json", "--out", opt + "/series"}), 0);
  EXPECT_TRUE(std::filesystem::exists(opt + "/series/accuracy.csv"));
  EXPECT_EQ(read_log(opt + "/eval_log.jsonl").size(), 20u);

  const auto m = manifest_from_json(read_json_file(opt + "/manifest.json"));
  EXPECT_EQ(m.iterations, 1);
  EXPECT_EQ(m.history.size(), 2u);
  EXPECT_EQ(m.seeds, std::vector<std::uint64_t>{2026});
}

TEST(Cli, IngestNormalizesDataset) {
  TempDir dir;
  write_dataset(dir / "in.jsonl", make_synthetic_instances(5, 1));
  ASSERT_EQ(cli({"ingest", "--dataset", (dir / "in.jsonl").string(), "--out", (dir / "o").string()}), 0);
  EXPECT_EQ(load_dataset(dir / "o/dataset.jsonl"), make_synthetic_instances(5, 1));
}

TEST(Cli, SimulateWritesPerSeedRows) {
  TempDir dir;
  testing::spit(dir / "c.ini", kSmallWorld);
  ASSERT_EQ(cli({"simulate", "--config", (dir / "c.ini").string(), "--seeds", "2", "--out", (dir / "o").string()}), 0);
  const auto j = read_json_file(dir / "o/simulation.json");
  EXPECT_EQ(j["runs"].size(), 2u);
}

}  // namespace
}  // namespace creditloom
