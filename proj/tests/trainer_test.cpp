// Copyright 2026 The STP Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stp/trainer.hpp"

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "stp/models.hpp"

namespace {

using stp::TrainConfig;

constexpr char kBase[] = R"(# short toy run
model = toy_resnet
T_total = 24
k = 4
T_shr = 18
N_p = 6
r = 0.15
batch_size = 16
samples = 400
snapshots = 0
)";

std::string key_of(const std::string& text, const std::vector<std::string>& ov = {}) {
  try {
    stp::parse_config(text, ov);
  } catch (const stp::ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

TEST(ConfigTest, ParsesKeysAndOverrides) {
  const TrainConfig c = stp::parse_config(kBase, {"beta1=0.5", "width_grid = 0.5, 1.0"});
  EXPECT_EQ(c.model, "toy_resnet");
  EXPECT_EQ(c.T_total, 24);
  EXPECT_EQ(c.N_p, 6u);
  EXPECT_EQ(c.beta1, 0.5);
  EXPECT_EQ(c.width_grid, std::vector<double>({0.5, 1.0}));
  EXPECT_EQ(c.eps, 0.03);
}

TEST(ConfigTest, ErrorsNameTheKey) {
  EXPECT_EQ(key_of("model = mlp\nT_total = 10\nk = 1\nT_shr = 5\nN_p = 2\n"), "r");
  EXPECT_EQ(key_of(kBase, {"colour=red"}), "colour");
  EXPECT_EQ(key_of(kBase, {"T_total=ten"}), "T_total");
  EXPECT_EQ(key_of(kBase, {"T_shr=100"}), "T_shr");
  EXPECT_EQ(key_of(kBase, {"alpha=1.5"}), "alpha");
  EXPECT_EQ(key_of(kBase, {"r=0"}), "r");
  EXPECT_EQ(key_of(kBase, {"dataset=imagenet"}), "dataset");
  EXPECT_EQ(key_of(kBase, {"init_gain=0"}), "init_gain");
  EXPECT_EQ(key_of(kBase, {"grad_clip=-1"}), "grad_clip");
  EXPECT_EQ(key_of(kBase), "<none>");
}

TEST(ConfigTest, FormatRoundTrips) {
  const TrainConfig c = stp::parse_config(kBase, {"literal_ema=1", "lambda=0.25", "seed=42"});
  const std::string text = stp::format_config(c);
  EXPECT_EQ(stp::format_config(stp::parse_config(text)), text);
}

TEST(TrainerTest, StpRunEndsWithOneSurvivorInTheBand) {
  const TrainConfig cfg = stp::parse_config(kBase);
  const stp::RunResult r = stp::run_stp(cfg);
  ASSERT_EQ(r.log.size(), 24u);
  EXPECT_EQ(r.initial_pool.size(), 6u);
  EXPECT_EQ(r.log.back().pool_size, 1u);
  EXPECT_NEAR(r.flops_ratio, 0.15, 0.15 * 0.03 + 1e-12);
  // N_shr = floor(4 * 5 / 18) = 1 at t = 4, 8, 12, 16; the last round at 16
  // keeps one entry.
  ASSERT_EQ(r.rounds.size(), 4u);
  EXPECT_EQ(r.rounds.back().t, 16);
  EXPECT_EQ(r.rounds.back().remaining.size(), 1u);
  EXPECT_EQ(r.rounds.back().remaining.front(), r.final_arch);
  for (const auto& rec : r.log) {
    EXPECT_DOUBLE_EQ(rec.lr, stp::cosine_lr(rec.t - 1, 24, cfg.sgd.lr0));
    EXPECT_TRUE(std::isfinite(rec.l_total));
    EXPECT_GE(rec.l_sts, 0.0);
    EXPECT_GE(rec.l_sme, 0.0);
    EXPECT_NEAR(rec.l_total, rec.l_ce + rec.l_sts + rec.l_sme, 1e-12);
    EXPECT_FALSE(rec.arch.empty());
  }
  // The compact net is the survivor extracted from the main network.
  EXPECT_EQ(r.pruned.params.count(), stp::make_space(cfg).cost(r.final_arch).params);
}

TEST(TrainerTest, RunsAreSeedDeterministic) {
  const TrainConfig cfg = stp::parse_config(kBase, {"T_total=8", "T_shr=8"});
  const auto a = stp::run_stp(cfg);
  const auto b = stp::run_stp(cfg);
  EXPECT_EQ(stp::log_csv(a.log), stp::log_csv(b.log));
  EXPECT_EQ(a.params, b.params);
  const auto c = stp::run_stp(stp::parse_config(kBase, {"T_total=8", "T_shr=8", "seed=1"}));
  EXPECT_NE(stp::log_csv(a.log), stp::log_csv(c.log));
}

TEST(TrainerTest, BetaZeroIgnoresDistillationTerms) {
  const TrainConfig cfg = stp::parse_config(kBase, {"beta1=0", "beta2=0", "T_total=6", "T_shr=6"});
  for (const auto& rec : stp::run_stp(cfg).log) EXPECT_DOUBLE_EQ(rec.l_total, rec.l_ce);
}

TEST(TrainerTest, SuppressedBaselineShrinksDroppedWeights) {
  const TrainConfig cfg =
      stp::parse_config(kBase, {"T_total=40", "lambda=1", "arch=((1, 1, 1, 1), (0.5, 0.5, 0.5, 0.3))"});
  const auto arch = stp::parse_arch(cfg.arch);
  const auto std_run = stp::run_standard(cfg, arch);
  const auto sup = stp::run_suppressed_baseline(cfg, arch);
  const stp::ArchSpace space = stp::make_space(cfg);
  stp::ParamStore dropped = stp::chosen_indicator(space.graph(), space.mask(arch));
  for (stp::Tensor* t : dropped.tensors())
    for (double& v : t->values()) v = 1.0 - v;
  EXPECT_LT(stp::masked_norm(sup.params, dropped), 0.8 * stp::masked_norm(std_run.params, dropped));
  EXPECT_EQ(std_run.final_arch, arch);
  // Standard training has no pool or distillation terms.
  for (const auto& rec : std_run.log) {
    EXPECT_EQ(rec.l_sts, 0.0);
    EXPECT_EQ(rec.pool_size, 0u);
  }
}

TEST(TrainerTest, SnapshotsAtEpochBoundaries) {
  const TrainConfig cfg = stp::parse_config(kBase, {"snapshots=1", "T_total=30", "T_shr=20"});
  const auto r = stp::run_standard(cfg);
  // 320 training rows at batch 16: 20 steps per epoch.
  EXPECT_EQ(r.snapshot_steps, std::vector<long long>({0, 20, 30}));
  EXPECT_EQ(r.snapshots.size(), 3u);
  EXPECT_EQ(r.snapshots.back(), r.params);
}

TEST(TrainerTest, LogCsvFormat) {
  stp::StepRecord rec;
  rec.t = 3;
  rec.lr = 0.1;
  rec.l_ce = 1.5;
  rec.pool_size = 2;
  rec.arch = "((1,), (0.5,))";
  const std::string csv = stp::log_csv({rec});
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,lr,L_CE,L_STS,L_SME,L_total,pool_size,sampled_arch");
  EXPECT_EQ(row, "3,0.10000000000000001,1.5,0,0,0,2,\"((1,), (0.5,))\"");
}

TEST(TrainerTest, AccuracyOfConstantClassifier) {
  const stp::CompGraph g = stp::parse_model_spec(
      "stpgraph v1\n0 input shape=2\n1 linear from=0 in=2 out=3 bias=1\n2 output from=1\n");
  stp::ParamStore p(g);
  p.at(1).bias = stp::Tensor({3}, {0.0, 1.0, 0.0});
  stp::Dataset d;
  d.features = stp::Tensor({4, 2});
  d.labels = {1, 0, 1, 2};
  d.num_classes = 3;
  EXPECT_DOUBLE_EQ(stp::accuracy(g, p, d, nullptr, 3), 0.5);
}

TEST(TrainerTest, LookupAccuracyTrainsTheCompactNet) {
  const TrainConfig cfg = stp::parse_config(kBase);
  const double acc = stp::lookup_accuracy(cfg, {{2, 2, 2, 2}, {1.0, 1.0, 1.0, 1.0}}, 200);
  EXPECT_GT(acc, 0.2);
  EXPECT_LE(acc, 1.0);
}

}  // namespace
