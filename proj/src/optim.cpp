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

#include "stp/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stp {

Sgd::Sgd(SgdHyper hyper) : hyper_(hyper) {
  if (hyper_.weight_decay < 0.0) {
    throw std::invalid_argument("sgd: weight_decay must be >= 0");
  }
}

void Sgd::step(std::span<Tensor* const> params,
               std::span<const Tensor* const> grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " grads");
  }
  if (lr < 0.0) throw std::invalid_argument("sgd: negative learning rate");
  if (buffers_.empty()) {
    for (const Tensor* p : params) buffers_.emplace_back(p->shape(), 0.0);
  } else if (buffers_.size() != params.size()) {
    throw ShapeError("sgd: parameter count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    Tensor& v = buffers_[k];
    if (p.shape() != g.shape() || p.shape() != v.shape()) {
      throw ShapeError("sgd: shape mismatch for parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.numel(); ++i) {
      v[i] = hyper_.momentum * v[i] + g[i] + hyper_.weight_decay * p[i];
      p[i] -= lr * v[i];
    }
  }
}

double cosine_lr(long long t, long long total, double lr0) {
  if (total <= 0 || t < 0 || t > total) {
    throw std::out_of_range("cosine_lr: step " + std::to_string(t) +
                            " outside [0, " + std::to_string(total) + "]");
  }
  if (t == total) return 0.0;
  return lr0 * 0.5 *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                         static_cast<double>(total)));
}

double clip_grad_norm(std::span<Tensor* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    for (std::size_t i = 0; i < g->numel(); ++i) sq += (*g)[i] * (*g)[i];
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* g : grads) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] *= s;
    }
  }
  return norm;
}

}  // namespace stp
