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

// Magnitude profiles, pool clustering metrics and the single-layer sigmoid
// distillation model.

#ifndef STP_ANALYSIS_HPP_
#define STP_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stp/arch.hpp"
#include "stp/interpreter.hpp"
#include "stp/pool.hpp"

namespace stp {

struct LayerMagnitude {
  int layer = 0;
  int stage = -1;
  double chosen_mean = 0;
  double unchosen_mean = 0;
  double baseline_mean = 0;           // over every baseline weight of the layer
  double baseline_unchosen_mean = 0;  // baseline weights at unchosen positions
  std::size_t chosen_count = 0;
  std::size_t unchosen_count = 0;
};

using MagnitudeProfile = std::vector<LayerMagnitude>;

// Mean |w| of prunable-layer weights, split by the mask. A mean over an empty
// partition is 0.
MagnitudeProfile magnitude_profile(const CompGraph& graph, const ParamStore& params,
                                   const StructMask& mask, const ParamStore& baseline);
// layer,stage,chosen_mean,unchosen_mean,baseline_mean,baseline_unchosen_mean
std::string magnitude_csv(const MagnitudeProfile& profile);

// Per-stage depth / stage size, then per-stage widths.
std::vector<double> arch_vector(const ArchSpec& arch, const CompGraph& graph);
// Mean squared distance of the arch vectors to their centroid.
double pool_sse(const std::vector<ArchSpec>& archs, const CompGraph& graph);
double pool_sse(const Pool& pool, const CompGraph& graph);

double sigmoid(double z);

struct ToyModel {
  std::vector<double> theta_s;
  std::vector<double> theta_d;
  std::vector<double> x_s;
  std::vector<double> x_d;
};

// (sig(theta_s.x_s + theta_d.x_d) - sig(theta_s.x_s))^2; the first term is
// the detached teacher.
double toy_kd_loss(const ToyModel& m);
// dL/dtheta_s with the teacher held constant.
std::vector<double> toy_kd_grad(const ToyModel& m);
// |[sig(z + d) - sig(z)] - sig(z)(1 - sig(z)) d|, z = theta_s.x_s, d = theta_d.x_d.
double taylor_gap(const ToyModel& m);

struct SingleLayerReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double grad_tol = 0;
  double grad_max_rel_err = 0;
  double ratio_lo = 0;
  double ratio_hi = 0;
  double ratio_min = 0;
  double ratio_max = 0;
  bool grad_pass = false;
  bool taylor_pass = false;
  bool pass() const { return grad_pass && taylor_pass; }
  std::string to_json() const;
};

// Finite-difference check of toy_kd_grad (central, h = 1e-5; error is the
// max-norm of the difference over the max-norm of the gradients) and the
// halving test of taylor_gap, on seeded random instances.
SingleLayerReport verify_appendix_e(std::size_t trials, std::uint64_t seed, double grad_tol = 1e-6,
                                  double ratio_lo = 3.5, double ratio_hi = 4.5);

}  // namespace stp

#endif  // STP_ANALYSIS_HPP_
