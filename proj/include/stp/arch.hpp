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

// Depth x width architecture space over the stages of a CompGraph.

#ifndef STP_ARCH_HPP_
#define STP_ARCH_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stp/cost.hpp"
#include "stp/graph.hpp"
#include "stp/rng.hpp"

namespace stp {

// Per stage: number of retained blocks and one width ratio.
struct ArchSpec {
  std::vector<int> depths;
  std::vector<double> widths;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
  friend auto operator<=>(const ArchSpec&, const ArchSpec&) = default;
};

// "((2, 3, 4, 2), (0.3, 0.3, 0.3, 0.7))"; one-stage tuples are written "(2,)".
std::string format_arch(const ArchSpec& arch);
// Throws std::invalid_argument with the offending position.
ArchSpec parse_arch(std::string_view text);

class ArchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& msg, double nearest)
      : std::runtime_error(msg), nearest_(nearest) {}
  // Achieved ratio closest to the band.
  double nearest() const { return nearest_; }

 private:
  double nearest_;
};

class WidthGrid {
 public:
  WidthGrid() : values_{0.3, 0.5, 0.7, 0.9, 1.0} {}
  // Strictly increasing, in (0, 1], ending at 1.0.
  explicit WidthGrid(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  // Index of a grid value (matched to 1e-9); throws ArchError otherwise.
  std::size_t index_of(double w) const;

 private:
  std::vector<double> values_;
};

// floor(w * C + 0.5), at least 1.
std::size_t kept_channels(double width, std::size_t channels);

class ArchSpace {
 public:
  // `input_shape` excludes the batch; empty means the graph's input shape.
  explicit ArchSpace(CompGraph graph, WidthGrid grid = {}, Shape input_shape = {});

  const CompGraph& graph() const { return graph_; }
  const WidthGrid& grid() const { return grid_; }
  std::size_t num_stages() const { return graph_.stages().size(); }

  ArchSpec full() const;
  // Throws ArchError when the arch does not fit the stage structure or grid.
  void check(const ArchSpec& arch) const;
  StructMask mask(const ArchSpec& arch) const;

  CostReport full_cost() const { return full_cost_; }
  CostReport cost(const ArchSpec& arch) const;
  double flops_ratio(const ArchSpec& arch) const;
  double params_ratio(const ArchSpec& arch) const;

  // Rejection sampling of uniformly drawn archs until the FLOPs ratio lies in
  // [r(1 - eps), r(1 + eps)]. r >= 1 returns the full arch.
  ArchSpec sample(double r, double eps, Rng& rng, std::size_t max_attempts = 100000) const;
  // Per stage: width uniform over grid values >= the current one, depth
  // uniform over [current, stage size].
  ArchSpec mutate_expand(const ArchSpec& arch, Rng& rng) const;
  // True iff big's mask keeps every layer and channel small's mask keeps.
  bool contains(const ArchSpec& big, const ArchSpec& small) const;

 private:
  CompGraph graph_;
  WidthGrid grid_;
  Shape batch_shape_;
  CostReport full_cost_;
};

StructMask arch_to_mask(const ArchSpec& arch, const CompGraph& graph);
double flops_ratio(const CompGraph& graph, const ArchSpec& arch, const Shape& input_shape);
double params_ratio(const CompGraph& graph, const ArchSpec& arch, const Shape& input_shape);

}  // namespace stp

#endif  // STP_ARCH_HPP_
