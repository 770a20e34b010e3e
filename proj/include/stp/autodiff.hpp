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

// Reverse-mode differentiation over dense tensors.
//
// A Tape owns every value produced while it is alive. Operations append a
// node holding the forward value and, when any input requires a gradient, a
// backward closure. Tape::backward() walks the nodes in exact reverse order.
// Tapes are single-use and must stay on the thread that built them.

#ifndef STP_AUTODIFF_HPP_
#define STP_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stp/tensor.hpp"

namespace stp::ad {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives gradient.
  Var constant(Tensor value);
  // A differentiable leaf owned by the tape.
  Var leaf(Tensor value);
  // A leaf that borrows external storage; `value` must outlive the tape.
  // Used for model parameters so forwards never copy weights.
  Var param(const Tensor& value, bool requires_grad = true);
  // Same value, cut from the graph: gradients never flow through the result.
  Var detach(Var v);

  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool detached(Var v) const { return nodes_.at(v.id).detached; }

  // Seeds d(v)/d(v) = 1 for a scalar v and propagates to every ancestor.
  void backward(Var scalar);

  // Gradient accumulated into v; a zero tensor if nothing reached it.
  Tensor grad(Var v) const;
  // Accumulation target used by backward rules.
  Tensor& grad_slot(Var v);
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool detached = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- kernels -------------------------------------------------------------
// Each operation computes its forward value eagerly and registers the
// matching backward rule.

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

struct PoolParams {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  std::size_t padding = 0;
};

// x[B, in] * w[out, in]^T + b[out]
Var linear(Tape& t, Var x, Var w, std::optional<Var> b);
Var matmul(Tape& t, Var a, Var b);
// x[B, C, H, W], w[O, C, k, k]
Var conv2d(Tape& t, Var x, Var w, std::optional<Var> b, Conv2dParams p);
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var add(Tape& t, std::span<const Var> xs);
Var add(Tape& t, Var a, Var b);
// Concatenation along dim 1.
Var concat(Tape& t, std::span<const Var> xs);
// [B, ...] -> [B, prod(...)]
Var flatten(Tape& t, Var x);
// [B, C, H, W] -> [B, C]
Var global_avg_pool(Tape& t, Var x);
Var max_pool2d(Tape& t, Var x, PoolParams p);
// Selects w[o, in_index[j], ...] for o < out_keep. Backward scatters into the
// full-size gradient, so unselected entries receive exactly zero.
Var select_channels(Tape& t, Var w, std::size_t out_keep,
                    std::span<const std::size_t> in_index);
// First n entries of a rank-1 tensor.
Var select_prefix(Tape& t, Var b, std::size_t n);
Var scale(Tape& t, Var x, double c);
// sum_i c_i * x_i over scalars.
Var weighted_sum(Tape& t, std::span<const Var> xs, std::span<const double> c);
Var sum(Tape& t, Var x);

// ---- losses ----------------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Tape& t, Var logits, std::span<const int> labels);

// Row-wise softmax of Z / ||Z||_2; uniform rows when ||Z||_2 < 1e-12.
Tensor normalized_probs(const Tensor& logits);

// Mean over the batch of KL(p_t || p_s) between normalized probabilities.
// The teacher branch is treated as detached: no gradient reaches it.
Var normalized_kl(Tape& t, Var teacher_logits, Var student_logits);

Tensor softmax_rows(const Tensor& logits);

}  // namespace stp::ad

#endif  // STP_AUTODIFF_HPP_
