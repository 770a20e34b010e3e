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

// Computation-graph IR.
//
// A CompGraph is a topologically ordered list of nodes. Prunable layers
// (linear / conv2d tagged with a stage) are organised as stages of blocks;
// a block is the unit skipped by a depth count and a stage is the unit that
// carries one width ratio. Graphs are immutable once built.

#ifndef STP_GRAPH_HPP_
#define STP_GRAPH_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stp/tensor.hpp"

namespace stp {

enum class NodeKind {
  kInput,
  kLinear,
  kConv2d,
  kAdd,
  kConcat,
  kRelu,
  kSigmoid,
  kFlatten,
  kGlobalPool,
  kMaxPool,
  kOutput,
};

std::string_view kind_name(NodeKind kind);
std::optional<NodeKind> kind_from_name(std::string_view name);
bool is_layer(NodeKind kind);
// Channel-preserving kinds that transmit coupling between producers.
bool is_pass_through(NodeKind kind);

struct NodeAttrs {
  // linear: features; conv2d: channels.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool bias = false;
  // input only: per-sample shape.
  Shape shape;
};

struct GraphNode {
  int id = 0;
  NodeKind kind = NodeKind::kInput;
  std::vector<int> inputs;
  NodeAttrs attrs;
  bool prunable = false;
  int stage = -1;
  int block = -1;
};

// Layer ids per block, blocks in order.
struct Stage {
  std::vector<std::vector<int>> blocks;
  std::size_t size() const { return blocks.size(); }
};

struct DependencyGroup {
  std::vector<int> members;  // ascending layer ids
  int reason = -1;           // add node forcing the coupling; -1 for singletons
  bool pinned = false;       // coupled to a fixed producer; never narrowed
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& msg);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(int node, const std::string& msg);
  int node() const { return node_; }

 private:
  int node_;
};

class CompGraph {
 public:
  // Validates topology, shapes, stage structure, dependency groups and block
  // skippability. Throws ValidationError naming the offending node.
  static CompGraph build(std::vector<GraphNode> nodes);

  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const GraphNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Stage>& stages() const { return stages_; }
  const Shape& input_shape() const { return nodes_.front().attrs.shape; }
  int output_id() const { return output_id_; }
  // Per-sample output shape of every node in the unpruned graph.
  const Shape& full_shape(int id) const { return full_shapes_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& prunable_layers() const { return prunable_; }
  const std::vector<int>& layers() const { return layers_; }
  const std::vector<DependencyGroup>& groups() const { return groups_; }
  // Index into groups() for a prunable layer.
  std::size_t group_of(int layer) const;
  std::vector<int> consumers(int id) const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<Stage> stages_;
  std::vector<Shape> full_shapes_;
  std::vector<int> prunable_;
  std::vector<int> layers_;
  std::vector<DependencyGroup> groups_;
  std::vector<std::size_t> group_index_;
  int output_id_ = -1;
};

// Textual model description, one node per line after an "stpgraph v1"
// header. See README for the grammar.
CompGraph parse_model_spec(std::string_view text);
CompGraph load_model_spec(const std::string& path);
std::string to_model_spec(const CompGraph& graph);

// Coupling analysis: prunable layers whose outputs meet at an add node along
// pass-through paths share a group. Concat producers stay independent.
std::vector<DependencyGroup> extract_dependency_groups(const CompGraph& graph);

// ---- masks ---------------------------------------------------------------

struct LayerMask {
  bool kept = true;
  std::size_t out_channels = 0;
  friend bool operator==(const LayerMask&, const LayerMask&) = default;
};

// Binary structured mask: per layer a keep flag and a kept-channel prefix.
// Indexed by node id; entries of non-layer nodes are unused.
class StructMask {
 public:
  StructMask() = default;
  static StructMask full(const CompGraph& graph);

  const LayerMask& at(int id) const { return layers_.at(static_cast<std::size_t>(id)); }
  LayerMask& at(int id) { return layers_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return layers_.size(); }

  friend bool operator==(const StructMask&, const StructMask&) = default;

 private:
  std::vector<LayerMask> layers_;
};

// Throws ValidationError if the mask cannot be applied to the graph.
void check_mask(const CompGraph& graph, const StructMask& mask);

}  // namespace stp

#endif  // STP_GRAPH_HPP_
