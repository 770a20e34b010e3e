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

#ifndef STP_COST_HPP_
#define STP_COST_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "stp/graph.hpp"

namespace stp {

struct NodeCost {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  std::map<int, NodeCost> per_node;
  // Shape handlers invoked; one per present node, independent of tensor size.
  std::uint64_t handler_calls = 0;

  std::string to_json() const;
};

struct CostOptions {
  // Count activations, pooling and adds (one FLOP per output element).
  bool count_elementwise = false;
};

// Shape-only estimate: a proxy carrying just the shape is pushed through the
// graph. `input_shape` includes the batch dimension. Multiply-accumulates
// count as 2 FLOPs; a bias adds 1 FLOP per output element.
CostReport estimate_cost(const CompGraph& graph, const Shape& input_shape,
                         const StructMask* mask = nullptr, CostOptions opts = {});

}  // namespace stp

#endif  // STP_COST_HPP_
