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

#include "stp/interpreter.hpp"

#include <cmath>
#include <numeric>

namespace stp {

ParamStore::ParamStore(const CompGraph& graph) : layers_(graph.size()) {
  for (int id : graph.layers()) {
    const GraphNode& n = graph.node(id);
    const NodeAttrs& a = n.attrs;
    LayerParams& p = layers_[static_cast<std::size_t>(id)];
    if (n.kind == NodeKind::kConv2d) {
      p.weight = Tensor({a.out, a.in, a.kernel, a.kernel});
    } else {
      p.weight = Tensor({a.out, a.in});
    }
    if (a.bias) p.bias = Tensor({a.out});
  }
}

std::vector<Tensor*> ParamStore::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    if (!l.weight.empty()) out.push_back(&l.weight);
    if (!l.bias.empty()) out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> ParamStore::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    if (!l.weight.empty()) out.push_back(&l.weight);
    if (!l.bias.empty()) out.push_back(&l.bias);
  }
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->numel();
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (!(a.layers_[i].weight == b.layers_[i].weight) ||
        !(a.layers_[i].bias == b.layers_[i].bias)) {
      return false;
    }
  }
  return true;
}

ParamStore init_params(const CompGraph& graph, Rng& rng, double gain) {
  ParamStore ps(graph);
  for (int id : graph.layers()) {
    Tensor& w = ps.at(id).weight;
    const std::size_t fan_in = w.numel() / w.dim(0);
    const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : w.values()) v = std * rng.normal();
  }
  return ps;
}

BoundParams bind_params(ad::Tape& tape, const ParamStore& params) {
  BoundParams b;
  b.weight.resize(params.size());
  b.bias.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const LayerParams& l = params.at(static_cast<int>(i));
    if (!l.weight.empty()) b.weight[i] = tape.param(l.weight);
    if (!l.bias.empty()) b.bias[i] = tape.param(l.bias);
  }
  return b;
}

void collect_grads(const ad::Tape& tape, const BoundParams& bound, ParamStore& grads) {
  auto acc = [&](ad::Var v, Tensor& dst) {
    if (!v.valid() || !tape.has_grad(v)) return;
    const Tensor g = tape.grad(v);
    if (dst.shape() != g.shape()) throw ShapeError("collect_grads: shape mismatch");
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
  };
  for (std::size_t i = 0; i < bound.weight.size(); ++i) {
    LayerParams& l = grads.at(static_cast<int>(i));
    acc(bound.weight[i], l.weight);
    acc(bound.bias[i], l.bias);
  }
}

namespace {

struct Value {
  ad::Var var;
  // Original indices of the channels (features, after flatten) present along
  // dim 1.
  std::vector<std::size_t> channels;
  bool present = false;
};

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

bool is_identity(const std::vector<std::size_t>& idx, std::size_t n) {
  if (idx.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (idx[i] != i) return false;
  return true;
}

}  // namespace

ad::Var interpret(ad::Tape& tape, const CompGraph& graph, const BoundParams& params,
                  ad::Var input, const StructMask& mask) {
  check_mask(graph, mask);
  const Tensor& x = tape.value(input);
  const Shape& sample = graph.input_shape();
  if (x.rank() != sample.size() + 1 ||
      !std::equal(sample.begin(), sample.end(), x.shape().begin() + 1)) {
    throw ShapeError("node 0 (input): got " + shape_str(x.shape()) + ", graph expects (B, " +
                     shape_str(sample).substr(1));
  }
  std::vector<Value> vals(graph.size());
  for (const GraphNode& n : graph.nodes()) {
    const auto id = static_cast<std::size_t>(n.id);
    Value& out = vals[id];
    auto in = [&](std::size_t k) -> const Value& {
      return vals[static_cast<std::size_t>(n.inputs[k])];
    };
    try {
      switch (n.kind) {
        case NodeKind::kInput:
          out = {input, iota_n(sample.front()), true};
          break;
        case NodeKind::kLinear:
        case NodeKind::kConv2d: {
          const LayerMask& lm = mask.at(n.id);
          if (!lm.kept) break;
          const Value& src = in(0);
          if (!src.present) throw ShapeError("input comes from a skipped block");
          const NodeAttrs& a = n.attrs;
          ad::Var w = params.weight[id];
          if (!is_identity(src.channels, a.in) || lm.out_channels != a.out) {
            w = ad::select_channels(tape, w, lm.out_channels, src.channels);
          }
          std::optional<ad::Var> b;
          if (a.bias) {
            b = params.bias[id];
            if (lm.out_channels != a.out) b = ad::select_prefix(tape, *b, lm.out_channels);
          }
          if (n.kind == NodeKind::kConv2d) {
            out.var = ad::conv2d(tape, src.var, w, b, {a.stride, a.padding});
          } else {
            out.var = ad::linear(tape, src.var, w, b);
          }
          out.channels = iota_n(lm.out_channels);
          out.present = true;
          break;
        }
        case NodeKind::kAdd: {
          std::vector<ad::Var> ops;
          const std::vector<std::size_t>* ch = nullptr;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (!in(k).present) continue;
            if (ch && *ch != in(k).channels) {
              throw ShapeError("operands carry different channel sets");
            }
            ch = &in(k).channels;
            ops.push_back(in(k).var);
          }
          if (ops.empty()) break;
          out.var = ops.size() == 1 ? ops.front() : ad::add(tape, ops);
          out.channels = *ch;
          out.present = true;
          break;
        }
        case NodeKind::kConcat: {
          std::vector<ad::Var> ops;
          std::size_t offset = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            if (!in(k).present) throw ShapeError("input comes from a skipped block");
            ops.push_back(in(k).var);
            for (auto c : in(k).channels) out.channels.push_back(c + offset);
            offset += graph.full_shape(n.inputs[k]).front();
          }
          out.var = ad::concat(tape, ops);
          out.present = true;
          break;
        }
        case NodeKind::kFlatten: {
          const Value& src = in(0);
          if (!src.present) break;
          const Shape& fs = graph.full_shape(n.inputs[0]);
          const std::size_t inner = shape_numel(fs) / fs.front();
          out.var = ad::flatten(tape, src.var);
          for (auto c : src.channels)
            for (std::size_t q = 0; q < inner; ++q) out.channels.push_back(c * inner + q);
          out.present = true;
          break;
        }
        case NodeKind::kRelu:
        case NodeKind::kSigmoid:
        case NodeKind::kGlobalPool:
        case NodeKind::kMaxPool: {
          const Value& src = in(0);
          if (!src.present) break;
          if (n.kind == NodeKind::kRelu) out.var = ad::relu(tape, src.var);
          else if (n.kind == NodeKind::kSigmoid) out.var = ad::sigmoid(tape, src.var);
          else if (n.kind == NodeKind::kGlobalPool) out.var = ad::global_avg_pool(tape, src.var);
          else out.var = ad::max_pool2d(tape, src.var, {n.attrs.kernel, n.attrs.stride, n.attrs.padding});
          out.channels = src.channels;
          out.present = true;
          break;
        }
        case NodeKind::kOutput:
          if (!in(0).present) throw ShapeError("output comes from a skipped block");
          return in(0).var;
      }
    } catch (const ShapeError& e) {
      throw ShapeError("node " + std::to_string(n.id) + " (" +
                       std::string(kind_name(n.kind)) + "): " + e.what());
    }
  }
  throw ShapeError("graph has no output node");
}

Tensor interpret(const CompGraph& graph, const ParamStore& params, const Tensor& input,
                 const StructMask& mask) {
  ad::Tape tape;
  BoundParams b;
  b.weight.resize(params.size());
  b.bias.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const LayerParams& l = params.at(static_cast<int>(i));
    if (!l.weight.empty()) b.weight[i] = tape.param(l.weight, false);
    if (!l.bias.empty()) b.bias[i] = tape.param(l.bias, false);
  }
  const ad::Var x = tape.param(input, false);
  return tape.value(interpret(tape, graph, b, x, mask));
}

Tensor interpret(const CompGraph& graph, const ParamStore& params, const Tensor& input) {
  return interpret(graph, params, input, StructMask::full(graph));
}

}  // namespace stp
