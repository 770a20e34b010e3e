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

// STP training loop and the two baselines (standard CE training and L2
// suppression of the dropped parameters).

#ifndef STP_TRAINER_HPP_
#define STP_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stp/arch.hpp"
#include "stp/data.hpp"
#include "stp/interpreter.hpp"
#include "stp/optim.hpp"
#include "stp/pool.hpp"
#include "stp/prune.hpp"

namespace stp {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& msg)
      : std::runtime_error(msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct TrainConfig {
  std::string model;
  long long T_total = 0;
  long long k = 0;
  long long T_shr = 0;
  std::size_t N_p = 0;
  double r = 0.0;
  double eps = 0.03;
  double alpha = 0.3;
  double beta1 = 1.0;
  double beta2 = 1.0;
  std::size_t n_support = 1;
  bool literal_ema = false;
  std::vector<double> width_grid = {0.3, 0.5, 0.7, 0.9, 1.0};
  SgdHyper sgd;
  double init_gain = 0.5;
  // Max joint gradient norm per step; 0 turns clipping off.
  double grad_clip = 5.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // "clusters" or "csv".
  std::string dataset = "clusters";
  std::size_t classes = 10;
  std::size_t samples = 2000;
  double spread = 2.0;
  std::uint64_t data_seed = 1;
  std::string train_csv;
  std::string test_csv;
  // Suppressed baseline.
  double lambda = 1e-2;
  // Fixed arch for the baselines; empty means one is sampled in the band.
  std::string arch;
  // Keep a copy of the parameters at every epoch boundary.
  bool snapshots = true;
};

// Flat "key = value" text; '#' starts a comment. Overrides ("key=value")
// are applied afterwards. Missing required keys (model, T_total, k, T_shr,
// N_p, r) and unknown keys raise ConfigError naming the key.
TrainConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
// Throws ConfigError when a value breaks a constraint.
void validate_config(const TrainConfig& cfg);
std::string format_config(const TrainConfig& cfg);

struct StepRecord {
  long long t = 0;
  double lr = 0;
  double l_ce = 0;
  double l_sts = 0;
  double l_sme = 0;
  double l_total = 0;
  std::size_t pool_size = 0;
  std::string arch;  // sampled target arch, empty without a pool
};

class TrainError : public std::runtime_error {
 public:
  TrainError(const std::string& msg, StepRecord rec)
      : std::runtime_error(msg), record_(std::move(rec)) {}
  const StepRecord& record() const { return record_; }

 private:
  StepRecord record_;
};

struct PoolRound {
  long long t = 0;
  std::vector<Removal> removed;
  std::vector<ArchSpec> remaining;
};

struct RunResult {
  ArchSpec final_arch;
  ParamStore params;  // main network
  PrunedNet pruned;
  std::vector<StepRecord> log;
  std::vector<ParamStore> snapshots;  // initial, then one per epoch
  std::vector<long long> snapshot_steps;
  std::vector<ArchSpec> initial_pool;
  std::vector<PoolRound> rounds;
  double main_accuracy = 0;    // test accuracy of the unpruned network
  double pruned_accuracy = 0;  // test accuracy of the compact network
  double flops_ratio = 0;
  double params_ratio = 0;
};

struct RunHooks {
  // Called after every k-th step and after every shrink round.
  std::function<void(long long t, const Pool& pool)> on_refine;
};

// Everything a step touches.
struct StepContext {
  const ArchSpace& space;
  const TrainConfig& cfg;
  ParamStore& params;
  Sgd& opt;
  Rng& rng;
  Pool* pool = nullptr;                    // STP only
  const ParamStore* dropped = nullptr;     // suppressed only: 1 on dropped entries
  double lambda = 0.0;
  std::vector<Removal>* removed = nullptr;  // filled when the step shrinks the pool
};

// One iteration: main CE, target and support normalized KL against the
// detached main logits, a single backward of the total loss, one SGD step
// at cosine_lr(t - 1, T_total), then the scheduled shrink.
StepRecord train_step(StepContext& ctx, const Batch& batch, long long t);

std::pair<Dataset, Dataset> load_data(const TrainConfig& cfg, const CompGraph& graph);
ArchSpace make_space(const TrainConfig& cfg);

RunResult run_stp(const TrainConfig& cfg, const RunHooks& hooks = {});
// Plain cross-entropy training; the arch only decides the reported pruning.
RunResult run_standard(const TrainConfig& cfg, std::optional<ArchSpec> arch = std::nullopt);
// CE + (lambda / 2) * ||theta_d||^2 over parameters outside the arch's mask.
RunResult run_suppressed_baseline(const TrainConfig& cfg,
                                  std::optional<ArchSpec> arch = std::nullopt);

// Trains `arch` from scratch as a standalone compact network with
// cross-entropy only, for `steps` iterations; returns its test accuracy.
double lookup_accuracy(const TrainConfig& cfg, const ArchSpec& arch, long long steps);

double accuracy(const CompGraph& graph, const ParamStore& params, const Dataset& data,
                const StructMask* mask = nullptr, std::size_t batch = 256);

// ||theta * indicator||_2 over every parameter.
double masked_norm(const ParamStore& params, const ParamStore& indicator);

// t,lr,L_CE,L_STS,L_SME,L_total,pool_size,sampled_arch; reals at 17
// significant digits.
std::string log_csv(const std::vector<StepRecord>& log);

}  // namespace stp

#endif  // STP_TRAINER_HPP_
