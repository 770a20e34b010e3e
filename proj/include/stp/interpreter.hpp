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

#ifndef STP_INTERPRETER_HPP_
#define STP_INTERPRETER_HPP_

#include <vector>

#include "stp/autodiff.hpp"
#include "stp/graph.hpp"
#include "stp/rng.hpp"

namespace stp {

struct LayerParams {
  Tensor weight;
  Tensor bias;  // empty when the layer has no bias
};

// Parameters of every layer, indexed by node id (empty for non-layers).
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(const CompGraph& graph);  // zero-initialised

  LayerParams& at(int id) { return layers_.at(static_cast<std::size_t>(id)); }
  const LayerParams& at(int id) const { return layers_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return layers_.size(); }

  // Flat views over every tensor in node order (weight before bias).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<LayerParams> layers_;
};

// Normal weights with std gain * sqrt(2 / fan_in) (He for gain 1), zero
// biases.
ParamStore init_params(const CompGraph& graph, Rng& rng, double gain = 1.0);

// Parameters registered on a tape, one Var per tensor of ParamStore::tensors().
struct BoundParams {
  std::vector<ad::Var> weight;  // by node id; invalid for non-layers
  std::vector<ad::Var> bias;
};

BoundParams bind_params(ad::Tape& tape, const ParamStore& params);
// Accumulates the tape gradients of bound parameters into `grads`.
void collect_grads(const ad::Tape& tape, const BoundParams& bound, ParamStore& grads);

// Masked forward on a tape. Skipped blocks drop out of their residual add and
// masked channels never enter a computation, so their parameters receive
// exactly zero gradient. Returns the output node's value.
ad::Var interpret(ad::Tape& tape, const CompGraph& graph, const BoundParams& params,
                  ad::Var input, const StructMask& mask);

// Pure forward without recording gradients.
Tensor interpret(const CompGraph& graph, const ParamStore& params, const Tensor& input,
                 const StructMask& mask);
Tensor interpret(const CompGraph& graph, const ParamStore& params, const Tensor& input);

}  // namespace stp

#endif  // STP_INTERPRETER_HPP_
