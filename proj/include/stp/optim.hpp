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

#ifndef STP_OPTIM_HPP_
#define STP_OPTIM_HPP_

#include <span>
#include <vector>

#include "stp/tensor.hpp"

namespace stp {

struct SgdHyper {
  double lr0 = 0.05;
  double momentum = 0.9;
  double weight_decay = 3e-4;
};

// SGD with heavy-ball momentum and coupled weight decay:
//   v <- momentum * v + g + weight_decay * theta
//   theta <- theta - lr * v
class Sgd {
 public:
  explicit Sgd(SgdHyper hyper);

  const SgdHyper& hyper() const { return hyper_; }

  // Buffers are created on the first step and their shapes are fixed
  // thereafter.
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
            double lr);

  const std::vector<Tensor>& momentum_buffers() const { return buffers_; }

 private:
  SgdHyper hyper_;
  std::vector<Tensor> buffers_;
};

// lr0 * 0.5 * (1 + cos(pi * t / T)), for 0 <= t <= T.
double cosine_lr(long long t, long long total, double lr0);

// Rescales all gradients so their joint L2 norm is at most max_norm and
// returns the norm before clipping. max_norm <= 0 leaves them untouched.
double clip_grad_norm(std::span<Tensor* const> grads, double max_norm);

}  // namespace stp

#endif  // STP_OPTIM_HPP_
