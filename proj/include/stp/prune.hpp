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

// Which parameters a mask selects, and materialisation of the compact network.

#ifndef STP_PRUNE_HPP_
#define STP_PRUNE_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "stp/arch.hpp"
#include "stp/graph.hpp"
#include "stp/interpreter.hpp"

namespace stp {

// Original channel (or, after flatten, feature) indices carried by every node
// under the mask; nullopt for values of skipped blocks.
using ChannelList = std::vector<std::size_t>;
std::vector<std::optional<ChannelList>> propagate_channels(const CompGraph& graph,
                                                           const StructMask& mask);

struct LayerSelection {
  bool kept = false;
  std::size_t out_keep = 0;
  ChannelList in_index;  // original input channels, in compact order
};

// Indexed by node id; entries of non-layer nodes are unused.
std::vector<LayerSelection> layer_selections(const CompGraph& graph, const StructMask& mask);

// 1.0 for every chosen parameter entry, 0.0 elsewhere.
ParamStore chosen_indicator(const CompGraph& graph, const StructMask& mask);

struct PrunedNet {
  CompGraph graph;
  ParamStore params;
};

// Standalone network with skipped blocks removed and channel counts reduced;
// weights are copied slices of `params`.
PrunedNet extract_pruned(const CompGraph& graph, const ParamStore& params, const StructMask& mask);
PrunedNet extract_pruned(const ArchSpace& space, const ParamStore& params, const ArchSpec& arch);

}  // namespace stp

#endif  // STP_PRUNE_HPP_
