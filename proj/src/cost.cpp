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

#include "stp/cost.hpp"

#include <optional>
#include <vector>

#include "json.hpp"

namespace stp {

namespace {

// Shape of a value flowing through the proxy run; nullopt when the producing
// block was skipped.
using Proxy = std::optional<Shape>;

std::size_t window_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p,
                       int node) {
  if (in + 2 * p < k || s == 0) {
    throw ValidationError(node, "shape inference: window larger than padded input");
  }
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

CostReport estimate_cost(const CompGraph& graph, const Shape& input_shape,
                         const StructMask* mask, CostOptions opts) {
  if (mask) check_mask(graph, *mask);
  const Shape& sample = graph.input_shape();
  if (input_shape.size() != sample.size() + 1 ||
      !std::equal(sample.begin(), sample.end(), input_shape.begin() + 1)) {
    throw ValidationError(0, "shape inference: input shape " + shape_str(input_shape) +
                                 " does not match (B, " + shape_str(sample).substr(1));
  }
  CostReport rep;
  std::vector<Proxy> vals(graph.size());
  for (const GraphNode& n : graph.nodes()) {
    const auto id = static_cast<std::size_t>(n.id);
    auto in = [&](std::size_t k) -> const Proxy& {
      return vals[static_cast<std::size_t>(n.inputs[k])];
    };
    auto fail = [&](const std::string& msg) {
      return ValidationError(n.id, "shape inference (" + std::string(kind_name(n.kind)) +
                                       "): " + msg);
    };
    NodeCost c;
    if (n.kind == NodeKind::kInput) {
      vals[id] = input_shape;
      ++rep.handler_calls;
      rep.per_node[n.id] = c;
      continue;
    }
    if (is_layer(n.kind) && mask && !mask->at(n.id).kept) continue;
    if (n.kind == NodeKind::kAdd) {
      Proxy out;
      std::size_t present = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!in(k)) continue;
        ++present;
        if (out && *out != *in(k)) {
          throw fail("operands " + shape_str(*out) + " and " + shape_str(*in(k)));
        }
        out = in(k);
      }
      if (!out) continue;
      if (opts.count_elementwise) c.flops = (present - 1) * shape_numel(*out);
      vals[id] = out;
      rep.per_node[n.id] = c;
      ++rep.handler_calls;
      continue;
    }
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      if (!in(k)) {
        if (is_pass_through(n.kind)) break;
        throw fail("input from a skipped block");
      }
    }
    if (!in(0)) continue;
    ++rep.handler_calls;
    const Shape& s = *in(0);
    const NodeAttrs& a = n.attrs;
    Shape out;
    switch (n.kind) {
      case NodeKind::kLinear: {
        if (s.size() != 2) throw fail("expects (B, F), got " + shape_str(s));
        const std::size_t o = mask ? mask->at(n.id).out_channels : a.out;
        const std::size_t B = s[0], f = s[1];
        c.flops = 2ULL * B * f * o + (a.bias ? B * o : 0);
        c.params = f * o + (a.bias ? o : 0);
        out = {B, o};
        break;
      }
      case NodeKind::kConv2d: {
        if (s.size() != 4) throw fail("expects (B, C, H, W), got " + shape_str(s));
        const std::size_t o = mask ? mask->at(n.id).out_channels : a.out;
        const std::size_t B = s[0], ci = s[1];
        const std::size_t ho = window_out(s[2], a.kernel, a.stride, a.padding, n.id);
        const std::size_t wo = window_out(s[3], a.kernel, a.stride, a.padding, n.id);
        const std::uint64_t macs = 1ULL * B * ci * o * a.kernel * a.kernel * ho * wo;
        c.flops = 2 * macs + (a.bias ? 1ULL * B * o * ho * wo : 0);
        c.params = 1ULL * ci * o * a.kernel * a.kernel + (a.bias ? o : 0);
        out = {B, o, ho, wo};
        break;
      }
      case NodeKind::kMaxPool: {
        if (s.size() != 4) throw fail("expects (B, C, H, W), got " + shape_str(s));
        out = {s[0], s[1], window_out(s[2], a.kernel, a.stride, a.padding, n.id),
               window_out(s[3], a.kernel, a.stride, a.padding, n.id)};
        if (opts.count_elementwise) c.flops = shape_numel(out) * a.kernel * a.kernel;
        break;
      }
      case NodeKind::kGlobalPool:
        if (s.size() != 4) throw fail("expects (B, C, H, W), got " + shape_str(s));
        out = {s[0], s[1]};
        if (opts.count_elementwise) c.flops = shape_numel(s);
        break;
      case NodeKind::kFlatten:
        out = {s[0], shape_numel(s) / s[0]};
        break;
      case NodeKind::kRelu:
      case NodeKind::kSigmoid:
        out = s;
        if (opts.count_elementwise) c.flops = shape_numel(s);
        break;
      case NodeKind::kConcat: {
        out = s;
        for (std::size_t k = 1; k < n.inputs.size(); ++k) out[1] += (*in(k))[1];
        break;
      }
      case NodeKind::kOutput:
        out = s;
        break;
      default:
        throw fail("no shape handler");
    }
    vals[id] = std::move(out);
    rep.per_node[n.id] = c;
  }
  if (!vals[static_cast<std::size_t>(graph.output_id())]) {
    throw ValidationError(graph.output_id(), "shape inference: output is unreachable");
  }
  for (const auto& [id, c] : rep.per_node) {
    rep.flops += c.flops;
    rep.params += c.params;
  }
  return rep;
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["flops"] = flops;
  j["params"] = params;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [id, c] : per_node) {
    per[std::to_string(id)] = {{"flops", c.flops}, {"params", c.params}};
  }
  j["per_node"] = std::move(per);
  return j.dump();
}

}  // namespace stp
