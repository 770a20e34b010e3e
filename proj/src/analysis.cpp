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

#include "stp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "stp/prune.hpp"

namespace stp {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("toy model: mismatched vector lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> draw(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

ToyModel draw_model(Rng& rng) {
  ToyModel m;
  const auto ds = static_cast<std::size_t>(rng.uniform_int(1, 8));
  const auto dd = static_cast<std::size_t>(rng.uniform_int(1, 8));
  m.theta_s = draw(rng, ds);
  m.x_s = draw(rng, ds);
  m.theta_d = draw(rng, dd);
  m.x_d = draw(rng, dd);
  return m;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

MagnitudeProfile magnitude_profile(const CompGraph& graph, const ParamStore& params,
                                   const StructMask& mask, const ParamStore& baseline) {
  const ParamStore ind = chosen_indicator(graph, mask);
  MagnitudeProfile prof;
  for (int id : graph.prunable_layers()) {
    const Tensor& w = params.at(id).weight;
    const Tensor& b = baseline.at(id).weight;
    const Tensor& m = ind.at(id).weight;
    if (w.shape() != m.shape() || b.shape() != m.shape()) {
      throw ShapeError("magnitude_profile: layer " + std::to_string(id) + " shapes differ");
    }
    LayerMagnitude lm;
    lm.layer = id;
    lm.stage = graph.node(id).stage;
    double cs = 0, us = 0, bs = 0, bus = 0;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      bs += std::abs(b[i]);
      if (m[i] > 0.5) {
        cs += std::abs(w[i]);
        ++lm.chosen_count;
      } else {
        us += std::abs(w[i]);
        bus += std::abs(b[i]);
        ++lm.unchosen_count;
      }
    }
    if (lm.chosen_count) lm.chosen_mean = cs / static_cast<double>(lm.chosen_count);
    if (lm.unchosen_count) {
      lm.unchosen_mean = us / static_cast<double>(lm.unchosen_count);
      lm.baseline_unchosen_mean = bus / static_cast<double>(lm.unchosen_count);
    }
    lm.baseline_mean = bs / static_cast<double>(w.numel());
    prof.push_back(lm);
  }
  return prof;
}

std::string magnitude_csv(const MagnitudeProfile& profile) {
  std::ostringstream os;
  os << "layer,stage,chosen_mean,unchosen_mean,baseline_mean,baseline_unchosen_mean\n";
  for (const auto& l : profile) {
    os << l.layer << ',' << l.stage << ',' << fmt17(l.chosen_mean) << ','
       << fmt17(l.unchosen_mean) << ',' << fmt17(l.baseline_mean) << ','
       << fmt17(l.baseline_unchosen_mean) << '\n';
  }
  return os.str();
}

std::vector<double> arch_vector(const ArchSpec& arch, const CompGraph& graph) {
  const auto& stages = graph.stages();
  if (arch.depths.size() != stages.size() || arch.widths.size() != stages.size()) {
    throw ArchError("arch_vector: " + format_arch(arch) + " does not match " +
                    std::to_string(stages.size()) + " stages");
  }
  std::vector<double> v;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    v.push_back(static_cast<double>(arch.depths[s]) / static_cast<double>(stages[s].size()));
  }
  v.insert(v.end(), arch.widths.begin(), arch.widths.end());
  return v;
}

double pool_sse(const std::vector<ArchSpec>& archs, const CompGraph& graph) {
  if (archs.empty()) throw std::invalid_argument("pool_sse: empty pool");
  std::vector<std::vector<double>> vs;
  for (const auto& a : archs) vs.push_back(arch_vector(a, graph));
  std::vector<double> c(vs.front().size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < v.size(); ++i) c[i] += v[i];
  for (double& x : c) x /= static_cast<double>(vs.size());
  double total = 0.0;
  for (const auto& v : vs)
    for (std::size_t i = 0; i < v.size(); ++i) total += (v[i] - c[i]) * (v[i] - c[i]);
  return total / static_cast<double>(vs.size());
}

double pool_sse(const Pool& pool, const CompGraph& graph) {
  std::vector<ArchSpec> archs;
  for (const auto& e : pool.entries()) archs.push_back(e.arch);
  return pool_sse(archs, graph);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double toy_kd_loss(const ToyModel& m) {
  const double z = dot(m.theta_s, m.x_s);
  const double diff = sigmoid(z + dot(m.theta_d, m.x_d)) - sigmoid(z);
  return diff * diff;
}

std::vector<double> toy_kd_grad(const ToyModel& m) {
  const double z = dot(m.theta_s, m.x_s);
  const double s = sigmoid(z);
  const double coef = -2.0 * (sigmoid(z + dot(m.theta_d, m.x_d)) - s) * s * (1.0 - s);
  std::vector<double> g(m.x_s.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = coef * m.x_s[i];
  return g;
}

double taylor_gap(const ToyModel& m) {
  const double z = dot(m.theta_s, m.x_s);
  const double d = dot(m.theta_d, m.x_d);
  const double s = sigmoid(z);
  return std::abs((sigmoid(z + d) - s) - s * (1.0 - s) * d);
}

std::string SingleLayerReport::to_json() const {
  nlohmann::ordered_json j;
  j["trials"] = trials;
  j["seed"] = seed;
  j["gradient"] = {{"max_rel_err", grad_max_rel_err}, {"tol", grad_tol}, {"pass", grad_pass}};
  j["taylor"] = {{"ratio_min", ratio_min},
                 {"ratio_max", ratio_max},
                 {"window", {ratio_lo, ratio_hi}},
                 {"pass", taylor_pass}};
  j["pass"] = pass();
  return j.dump();
}

SingleLayerReport verify_appendix_e(std::size_t trials, std::uint64_t seed, double grad_tol,
                                  double ratio_lo, double ratio_hi) {
  if (trials < 1) throw std::invalid_argument("verify_appendix_e: trials must be >= 1");
  SingleLayerReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.grad_tol = grad_tol;
  rep.ratio_lo = ratio_lo;
  rep.ratio_hi = ratio_hi;
  rep.ratio_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = -std::numeric_limits<double>::infinity();
  Rng rng(seed);
  const double h = 1e-5;
  for (std::size_t t = 0; t < trials; ++t) {
    // Gradient against central differences; the teacher stays at theta_s.
    const ToyModel m = draw_model(rng);
    const double teacher = sigmoid(dot(m.theta_s, m.x_s) + dot(m.theta_d, m.x_d));
    auto loss_at = [&](const std::vector<double>& ts) {
      const double d = teacher - sigmoid(dot(ts, m.x_s));
      return d * d;
    };
    const auto g = toy_kd_grad(m);
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto tp = m.theta_s, tm = m.theta_s;
      tp[i] += h;
      tm[i] -= h;
      const double num = (loss_at(tp) - loss_at(tm)) / (2 * h);
      err = std::max(err, std::abs(num - g[i]));
      scale = std::max({scale, std::abs(num), std::abs(g[i])});
    }
    rep.grad_max_rel_err = std::max(rep.grad_max_rel_err, scale > 0 ? err / scale : err);

    // Halving test. Where sig''(z) = 0 the remainder is cubic, so instances
    // with |1 - 2 sig(z)| < 0.1 are redrawn.
    ToyModel q = draw_model(rng);
    while (std::abs(1.0 - 2.0 * sigmoid(dot(q.theta_s, q.x_s))) < 0.1 ||
           dot(q.theta_d, q.x_d) == 0.0) {
      q = draw_model(rng);
    }
    const double target = rng.uniform(0.01, 0.1);
    const double d = dot(q.theta_d, q.x_d);
    for (double& v : q.theta_d) v *= target / std::abs(d);
    ToyModel half = q;
    for (double& v : half.theta_d) v *= 0.5;
    const double ratio = taylor_gap(q) / taylor_gap(half);
    rep.ratio_min = std::min(rep.ratio_min, ratio);
    rep.ratio_max = std::max(rep.ratio_max, ratio);
  }
  rep.grad_pass = rep.grad_max_rel_err <= grad_tol;
  rep.taylor_pass = rep.ratio_min >= ratio_lo && rep.ratio_max <= ratio_hi;
  return rep;
}

}  // namespace stp
