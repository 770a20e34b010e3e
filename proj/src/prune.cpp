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

#include "stp/prune.hpp"

#include <numeric>

namespace stp {

namespace {

ChannelList iota_list(std::size_t n) {
  ChannelList v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::vector<std::optional<ChannelList>> propagate_channels(const CompGraph& graph,
                                                           const StructMask& mask) {
  check_mask(graph, mask);
  std::vector<std::optional<ChannelList>> ch(graph.size());
  for (const GraphNode& n : graph.nodes()) {
    auto& out = ch[static_cast<std::size_t>(n.id)];
    auto in = [&](std::size_t k) -> const std::optional<ChannelList>& {
      return ch[static_cast<std::size_t>(n.inputs[k])];
    };
    switch (n.kind) {
      case NodeKind::kInput:
        out = iota_list(graph.input_shape().front());
        break;
      case NodeKind::kLinear:
      case NodeKind::kConv2d:
        if (mask.at(n.id).kept) {
          if (!in(0)) throw ValidationError(n.id, "input comes from a skipped block");
          out = iota_list(mask.at(n.id).out_channels);
        }
        break;
      case NodeKind::kAdd:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (!in(k)) continue;
          if (out && *out != *in(k)) {
            throw ValidationError(n.id, "add operands carry different channel sets");
          }
          out = in(k);
        }
        break;
      case NodeKind::kConcat: {
        ChannelList c;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          if (!in(k)) throw ValidationError(n.id, "input comes from a skipped block");
          for (auto i : *in(k)) c.push_back(i + offset);
          offset += graph.full_shape(n.inputs[k]).front();
        }
        out = std::move(c);
        break;
      }
      case NodeKind::kFlatten:
        if (in(0)) {
          const Shape& fs = graph.full_shape(n.inputs[0]);
          const std::size_t inner = shape_numel(fs) / fs.front();
          ChannelList c;
          for (auto i : *in(0))
            for (std::size_t q = 0; q < inner; ++q) c.push_back(i * inner + q);
          out = std::move(c);
        }
        break;
      case NodeKind::kRelu:
      case NodeKind::kSigmoid:
      case NodeKind::kGlobalPool:
      case NodeKind::kMaxPool:
      case NodeKind::kOutput:
        out = in(0);
        break;
    }
  }
  if (!ch[static_cast<std::size_t>(graph.output_id())]) {
    throw ValidationError(graph.output_id(), "output comes from a skipped block");
  }
  return ch;
}

std::vector<LayerSelection> layer_selections(const CompGraph& graph, const StructMask& mask) {
  const auto ch = propagate_channels(graph, mask);
  std::vector<LayerSelection> sel(graph.size());
  for (int id : graph.layers()) {
    const GraphNode& n = graph.node(id);
    const auto& src = ch[static_cast<std::size_t>(n.inputs[0])];
    LayerSelection& s = sel[static_cast<std::size_t>(id)];
    if (!mask.at(id).kept || !src) continue;
    s.kept = true;
    s.out_keep = mask.at(id).out_channels;
    s.in_index = *src;
  }
  return sel;
}

ParamStore chosen_indicator(const CompGraph& graph, const StructMask& mask) {
  const auto sel = layer_selections(graph, mask);
  ParamStore ind(graph);
  for (int id : graph.layers()) {
    const LayerSelection& s = sel[static_cast<std::size_t>(id)];
    if (!s.kept) continue;
    LayerParams& p = ind.at(id);
    const std::size_t in_full = p.weight.dim(1);
    const std::size_t inner = p.weight.numel() / (p.weight.dim(0) * in_full);
    for (std::size_t o = 0; o < s.out_keep; ++o)
      for (std::size_t i : s.in_index)
        for (std::size_t q = 0; q < inner; ++q) p.weight[(o * in_full + i) * inner + q] = 1.0;
    for (std::size_t o = 0; o < s.out_keep && !p.bias.empty(); ++o) p.bias[o] = 1.0;
  }
  return ind;
}

PrunedNet extract_pruned(const CompGraph& graph, const ParamStore& params,
                         const StructMask& mask) {
  const auto ch = propagate_channels(graph, mask);
  const auto sel = layer_selections(graph, mask);
  // Old id -> new id; -1 for dropped nodes.
  std::vector<int> remap(graph.size(), -1);
  std::vector<GraphNode> nodes;
  std::vector<std::pair<int, int>> copied;  // (old, new) layer ids
  for (const GraphNode& n : graph.nodes()) {
    const auto id = static_cast<std::size_t>(n.id);
    if (!ch[id]) continue;
    GraphNode m = n;
    m.inputs.clear();
    for (int p : n.inputs) {
      if (remap[static_cast<std::size_t>(p)] >= 0) m.inputs.push_back(remap[static_cast<std::size_t>(p)]);
    }
    if (n.kind == NodeKind::kAdd && m.inputs.size() == 1) {
      remap[id] = m.inputs.front();
      continue;
    }
    if (is_layer(n.kind)) {
      m.attrs.in = sel[id].in_index.size();
      m.attrs.out = sel[id].out_keep;
    }
    if (n.kind == NodeKind::kInput) m.attrs.shape = graph.input_shape();
    m.id = static_cast<int>(nodes.size());
    remap[id] = m.id;
    if (is_layer(n.kind)) copied.emplace_back(n.id, m.id);
    nodes.push_back(std::move(m));
  }
  PrunedNet net{CompGraph::build(std::move(nodes)), {}};
  net.params = ParamStore(net.graph);
  for (auto [old_id, new_id] : copied) {
    const LayerSelection& s = sel[static_cast<std::size_t>(old_id)];
    const LayerParams& src = params.at(old_id);
    LayerParams& dst = net.params.at(new_id);
    const std::size_t in_full = src.weight.dim(1);
    const std::size_t inner = src.weight.numel() / (src.weight.dim(0) * in_full);
    const std::size_t in_keep = s.in_index.size();
    for (std::size_t o = 0; o < s.out_keep; ++o)
      for (std::size_t j = 0; j < in_keep; ++j)
        for (std::size_t q = 0; q < inner; ++q)
          dst.weight[(o * in_keep + j) * inner + q] =
              src.weight[(o * in_full + s.in_index[j]) * inner + q];
    for (std::size_t o = 0; o < s.out_keep && !src.bias.empty(); ++o) dst.bias[o] = src.bias[o];
  }
  return net;
}

PrunedNet extract_pruned(const ArchSpace& space, const ParamStore& params, const ArchSpec& arch) {
  return extract_pruned(space.graph(), params, space.mask(arch));
}

}  // namespace stp
