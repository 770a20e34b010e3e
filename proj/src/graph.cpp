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

#include "stp/graph.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace stp {

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 11> kKindNames{{
    {NodeKind::kInput, "input"},
    {NodeKind::kLinear, "linear"},
    {NodeKind::kConv2d, "conv2d"},
    {NodeKind::kAdd, "add"},
    {NodeKind::kConcat, "concat"},
    {NodeKind::kRelu, "relu"},
    {NodeKind::kSigmoid, "sigmoid"},
    {NodeKind::kFlatten, "flatten"},
    {NodeKind::kGlobalPool, "global_pool"},
    {NodeKind::kMaxPool, "max_pool"},
    {NodeKind::kOutput, "output"},
}};

std::size_t window_out(std::size_t in, std::size_t k, std::size_t s,
                       std::size_t p) {
  if (in + 2 * p < k || s == 0) return 0;
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

std::string_view kind_name(NodeKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<NodeKind> kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

bool is_layer(NodeKind kind) {
  return kind == NodeKind::kLinear || kind == NodeKind::kConv2d;
}

bool is_pass_through(NodeKind kind) {
  return kind == NodeKind::kRelu || kind == NodeKind::kSigmoid ||
         kind == NodeKind::kFlatten || kind == NodeKind::kGlobalPool ||
         kind == NodeKind::kMaxPool;
}

ParseError::ParseError(std::size_t line, const std::string& msg)
    : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}

ValidationError::ValidationError(int node, const std::string& msg)
    : std::runtime_error(node >= 0 ? "node " + std::to_string(node) + ": " + msg : msg),
      node_(node) {}

// ---- build ------------------------------------------------------------------

namespace {

Shape infer_shape(const GraphNode& n, const std::vector<Shape>& shapes) {
  auto in_shape = [&](std::size_t k) -> const Shape& {
    return shapes[static_cast<std::size_t>(n.inputs[k])];
  };
  auto fail = [&](const std::string& msg) -> ValidationError {
    return ValidationError(n.id, std::string(kind_name(n.kind)) + ": " + msg);
  };
  const NodeAttrs& a = n.attrs;
  switch (n.kind) {
    case NodeKind::kInput:
      if (a.shape.empty()) throw fail("input needs a shape");
      for (auto d : a.shape)
        if (d == 0) throw fail("zero dimension in input shape");
      return a.shape;
    case NodeKind::kLinear: {
      const Shape& s = in_shape(0);
      if (s.size() != 1) throw fail("expects a feature vector, got " + shape_str(s));
      if (s[0] != a.in) {
        throw fail("in=" + std::to_string(a.in) + " but producer has " +
                   std::to_string(s[0]) + " features");
      }
      return {a.out};
    }
    case NodeKind::kConv2d: {
      const Shape& s = in_shape(0);
      if (s.size() != 3) throw fail("expects a C x H x W map, got " + shape_str(s));
      if (s[0] != a.in) {
        throw fail("in=" + std::to_string(a.in) + " but producer has " +
                   std::to_string(s[0]) + " channels");
      }
      const auto ho = window_out(s[1], a.kernel, a.stride, a.padding);
      const auto wo = window_out(s[2], a.kernel, a.stride, a.padding);
      if (ho == 0 || wo == 0) throw fail("kernel larger than padded input");
      return {a.out, ho, wo};
    }
    case NodeKind::kMaxPool: {
      const Shape& s = in_shape(0);
      if (s.size() != 3) throw fail("expects a C x H x W map, got " + shape_str(s));
      const auto ho = window_out(s[1], a.kernel, a.stride, a.padding);
      const auto wo = window_out(s[2], a.kernel, a.stride, a.padding);
      if (ho == 0 || wo == 0) throw fail("window larger than padded input");
      return {s[0], ho, wo};
    }
    case NodeKind::kAdd: {
      if (n.inputs.size() < 2) throw fail("needs at least two operands");
      for (std::size_t k = 1; k < n.inputs.size(); ++k) {
        if (in_shape(k) != in_shape(0)) {
          throw fail("operand shapes " + shape_str(in_shape(0)) + " and " +
                     shape_str(in_shape(k)) + " differ");
        }
      }
      return in_shape(0);
    }
    case NodeKind::kConcat: {
      if (n.inputs.size() < 2) throw fail("needs at least two operands");
      Shape out = in_shape(0);
      for (std::size_t k = 1; k < n.inputs.size(); ++k) {
        Shape s = in_shape(k);
        if (s.size() != out.size() ||
            !std::equal(s.begin() + 1, s.end(), out.begin() + 1)) {
          throw fail("operand shapes " + shape_str(in_shape(0)) + " and " +
                     shape_str(s) + " are not concatenable");
        }
        out[0] += s[0];
      }
      return out;
    }
    case NodeKind::kRelu:
    case NodeKind::kSigmoid:
    case NodeKind::kOutput:
      return in_shape(0);
    case NodeKind::kFlatten:
      return {shape_numel(in_shape(0))};
    case NodeKind::kGlobalPool: {
      const Shape& s = in_shape(0);
      if (s.size() != 3) throw fail("expects a C x H x W map, got " + shape_str(s));
      return {s[0]};
    }
  }
  throw fail("unknown kind");
}

std::size_t expected_arity(NodeKind k) {
  switch (k) {
    case NodeKind::kInput:
      return 0;
    case NodeKind::kAdd:
    case NodeKind::kConcat:
      return static_cast<std::size_t>(-1);
    default:
      return 1;
  }
}

// Marks nodes that become absent when `skipped` layers are removed. Throws if
// an absent value would reach anything other than an add node.
void check_skip_set(const CompGraph& g, const std::set<int>& skipped, int stage,
                    std::size_t depth) {
  std::vector<char> absent(g.size(), 0);
  for (const GraphNode& n : g.nodes()) {
    const auto id = static_cast<std::size_t>(n.id);
    auto fail = [&](const std::string& why) {
      return ValidationError(n.id, "stage " + std::to_string(stage) +
                                       " cannot keep only " + std::to_string(depth) +
                                       " block(s): " + why);
    };
    if (skipped.count(n.id)) {
      absent[id] = 1;
      continue;
    }
    if (n.kind == NodeKind::kAdd) {
      absent[id] = std::all_of(n.inputs.begin(), n.inputs.end(),
                               [&](int p) { return absent[static_cast<std::size_t>(p)]; });
      continue;
    }
    const bool any_absent = std::any_of(n.inputs.begin(), n.inputs.end(), [&](int p) {
      return absent[static_cast<std::size_t>(p)];
    });
    if (!any_absent) continue;
    if (is_pass_through(n.kind)) {
      absent[id] = 1;
      continue;
    }
    throw fail("a skipped block feeds " + std::string(kind_name(n.kind)) +
               " instead of a residual add");
  }
}

}  // namespace

CompGraph CompGraph::build(std::vector<GraphNode> nodes) {
  CompGraph g;
  if (nodes.empty()) throw ValidationError(-1, "empty graph");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const GraphNode& n = nodes[i];
    if (n.id != static_cast<int>(i)) {
      throw ValidationError(n.id, "node ids must be 0, 1, 2, ... in order (expected " +
                                      std::to_string(i) + ")");
    }
    const std::size_t arity = expected_arity(n.kind);
    if (arity != static_cast<std::size_t>(-1) && n.inputs.size() != arity) {
      throw ValidationError(n.id, std::string(kind_name(n.kind)) + " takes " +
                                      std::to_string(arity) + " input(s), got " +
                                      std::to_string(n.inputs.size()));
    }
    for (int p : n.inputs) {
      if (p < 0 || p >= static_cast<int>(nodes.size())) {
        throw ValidationError(n.id, "edge to undefined node " + std::to_string(p));
      }
      if (p >= n.id) {
        throw ValidationError(n.id, "edge to node " + std::to_string(p) +
                                        " breaks topological order (cycle or forward edge)");
      }
      if (nodes[static_cast<std::size_t>(p)].kind == NodeKind::kOutput) {
        throw ValidationError(n.id, "output node cannot feed other nodes");
      }
    }
    if (n.prunable && !is_layer(n.kind)) {
      throw ValidationError(n.id, std::string(kind_name(n.kind)) + " cannot be prunable");
    }
    if (n.prunable != (n.stage >= 0)) {
      throw ValidationError(n.id, "prunable layers need a stage and block; others must not have one");
    }
    if (n.prunable && n.block < 0) throw ValidationError(n.id, "prunable layer without block");
    if (is_layer(n.kind) && (n.attrs.in == 0 || n.attrs.out == 0 || n.attrs.kernel == 0 ||
                             n.attrs.stride == 0)) {
      throw ValidationError(n.id, "dimensional attributes must be positive");
    }
  }
  if (nodes.front().kind != NodeKind::kInput) {
    throw ValidationError(0, "first node must be the input");
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::kInput) {
      throw ValidationError(nodes[i].id, "only one input node is allowed");
    }
  }
  std::vector<int> outputs;
  for (const auto& n : nodes)
    if (n.kind == NodeKind::kOutput) outputs.push_back(n.id);
  if (outputs.size() != 1) {
    throw ValidationError(-1, "graph needs exactly one output node, found " +
                                  std::to_string(outputs.size()));
  }
  g.output_id_ = outputs.front();

  // Shapes.
  g.full_shapes_.reserve(nodes.size());
  for (const auto& n : nodes) g.full_shapes_.push_back(infer_shape(n, g.full_shapes_));

  // Stages: contiguous numbering, blocks contiguous within a stage.
  std::map<int, std::map<int, std::vector<int>>> tagged;
  for (const auto& n : nodes) {
    if (is_layer(n.kind)) g.layers_.push_back(n.id);
    if (!n.prunable) continue;
    g.prunable_.push_back(n.id);
    tagged[n.stage][n.block].push_back(n.id);
  }
  int expect_stage = 0;
  for (auto& [s, blocks] : tagged) {
    if (s != expect_stage) {
      throw ValidationError(blocks.begin()->second.front(),
                            "stage numbers must be contiguous from 0 (missing stage " +
                                std::to_string(expect_stage) + ")");
    }
    ++expect_stage;
    Stage st;
    int expect_block = 0;
    for (auto& [b, ids] : blocks) {
      if (b != expect_block) {
        throw ValidationError(ids.front(), "block numbers in stage " + std::to_string(s) +
                                               " must be contiguous from 0");
      }
      ++expect_block;
      st.blocks.push_back(ids);
    }
    g.stages_.push_back(std::move(st));
  }
  // Blocks must appear in order.
  for (std::size_t s = 0; s < g.stages_.size(); ++s) {
    for (std::size_t b = 1; b < g.stages_[s].blocks.size(); ++b) {
      if (g.stages_[s].blocks[b].front() < g.stages_[s].blocks[b - 1].back()) {
        throw ValidationError(g.stages_[s].blocks[b].front(),
                              "blocks of a stage must appear in topological order");
      }
    }
  }

  g.nodes_ = std::move(nodes);
  g.groups_ = extract_dependency_groups(g);
  g.group_index_.assign(g.nodes_.size(), static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < g.groups_.size(); ++k) {
    int stage = -1;
    for (int m : g.groups_[k].members) {
      g.group_index_[static_cast<std::size_t>(m)] = k;
      const int s = g.node(m).stage;
      if (stage >= 0 && s != stage) {
        throw ValidationError(g.groups_[k].reason,
                              "dependency group spans stages " + std::to_string(stage) +
                                  " and " + std::to_string(s));
      }
      stage = s;
    }
  }
  // Every depth count must be realisable: skipping any suffix of blocks.
  for (std::size_t s = 0; s < g.stages_.size(); ++s) {
    const auto& blocks = g.stages_[s].blocks;
    for (std::size_t keep = 1; keep < blocks.size(); ++keep) {
      std::set<int> skipped;
      for (std::size_t b = keep; b < blocks.size(); ++b)
        skipped.insert(blocks[b].begin(), blocks[b].end());
      check_skip_set(g, skipped, static_cast<int>(s), keep);
    }
  }
  return g;
}

std::size_t CompGraph::group_of(int layer) const {
  const std::size_t k = group_index_.at(static_cast<std::size_t>(layer));
  if (k == static_cast<std::size_t>(-1)) {
    throw ValidationError(layer, "not a prunable layer");
  }
  return k;
}

std::vector<int> CompGraph::consumers(int id) const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end()) out.push_back(n.id);
  return out;
}

// ---- dependency groups --------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
};

// Nodes whose output channels determine `id`'s channels along pass-through
// and add paths.
void channel_sources(const CompGraph& g, int id, std::vector<int>& out) {
  const GraphNode& n = g.node(id);
  if (n.prunable) {
    out.push_back(id);
  } else if (is_pass_through(n.kind)) {
    channel_sources(g, n.inputs.front(), out);
  } else if (n.kind == NodeKind::kAdd) {
    for (int p : n.inputs) channel_sources(g, p, out);
  } else {
    if (n.kind == NodeKind::kConcat) {
      throw ValidationError(id, "concat output feeding an add is not supported");
    }
    out.push_back(id);  // fixed producer
  }
}

}  // namespace

std::vector<DependencyGroup> extract_dependency_groups(const CompGraph& graph) {
  UnionFind uf(graph.size());
  std::vector<std::pair<int, int>> add_roots;  // (add id, a source)
  std::vector<int> fixed_sources;
  for (const GraphNode& node : graph.nodes()) {
    if (node.kind != NodeKind::kAdd) continue;
    std::vector<int> sources;
    for (int p : node.inputs) channel_sources(graph, p, sources);
    std::size_t channels = 0;
    for (int s : sources) {
      const std::size_t c = graph.full_shape(s).front();
      if (channels != 0 && c != channels) {
        throw ValidationError(node.id, "add producers have mismatched channel counts (" +
                                           std::to_string(channels) + " vs " +
                                           std::to_string(c) + ")");
      }
      channels = c;
      if (!graph.node(s).prunable) fixed_sources.push_back(s);
    }
    for (std::size_t k = 1; k < sources.size(); ++k) uf.unite(sources[0], sources[k]);
    add_roots.emplace_back(node.id, sources[0]);
  }
  std::map<int, int> reason;  // root -> earliest add
  for (auto [add_id, src] : add_roots) {
    const int r = uf.find(src);
    if (!reason.count(r)) reason[r] = add_id;
  }
  std::set<int> pinned;
  for (int s : fixed_sources) pinned.insert(uf.find(s));

  std::map<int, DependencyGroup> by_root;
  for (int id : graph.prunable_layers()) by_root[uf.find(id)].members.push_back(id);
  std::vector<DependencyGroup> groups;
  for (auto& [root, grp] : by_root) {
    auto it = reason.find(root);
    grp.reason = it == reason.end() ? -1 : it->second;
    grp.pinned = pinned.count(root) > 0;
    groups.push_back(grp);
  }
  std::sort(groups.begin(), groups.end(),
            [](const DependencyGroup& a, const DependencyGroup& b) {
              return a.members.front() < b.members.front();
            });
  return groups;
}

// ---- masks --------------------------------------------------------------------

StructMask StructMask::full(const CompGraph& graph) {
  StructMask m;
  m.layers_.resize(graph.size());
  for (int id : graph.layers()) {
    m.layers_[static_cast<std::size_t>(id)] = {true, graph.node(id).attrs.out};
  }
  return m;
}

void check_mask(const CompGraph& graph, const StructMask& mask) {
  if (mask.size() != graph.size()) {
    throw ValidationError(-1, "mask has " + std::to_string(mask.size()) +
                                  " entries for a graph of " + std::to_string(graph.size()) +
                                  " nodes");
  }
  for (int id : graph.layers()) {
    const GraphNode& n = graph.node(id);
    const LayerMask& lm = mask.at(id);
    if (!n.prunable) {
      if (!lm.kept || lm.out_channels != n.attrs.out) {
        throw ValidationError(id, "fixed layer must stay whole");
      }
      continue;
    }
    if (lm.kept && (lm.out_channels == 0 || lm.out_channels > n.attrs.out)) {
      throw ValidationError(id, "kept channels " + std::to_string(lm.out_channels) +
                                    " outside [1, " + std::to_string(n.attrs.out) + "]");
    }
  }
  for (const Stage& st : graph.stages()) {
    for (int id : st.blocks.front()) {
      if (!mask.at(id).kept) throw ValidationError(id, "first block of a stage must be kept");
    }
    for (const auto& block : st.blocks) {
      const bool kept = mask.at(block.front()).kept;
      for (int id : block) {
        if (mask.at(id).kept != kept) {
          throw ValidationError(id, "layers of a block must be kept or skipped together");
        }
      }
    }
    // Kept blocks form a prefix.
    bool seen_skip = false;
    for (const auto& block : st.blocks) {
      if (!mask.at(block.front()).kept) seen_skip = true;
      else if (seen_skip) throw ValidationError(block.front(), "kept blocks must be a prefix of the stage");
    }
  }
  for (const DependencyGroup& grp : graph.groups()) {
    std::size_t c = 0;
    for (int id : grp.members) {
      const LayerMask& lm = mask.at(id);
      if (!lm.kept) continue;
      if (grp.pinned && lm.out_channels != graph.node(id).attrs.out) {
        throw ValidationError(id, "layer is coupled to a fixed producer and cannot be narrowed");
      }
      if (c != 0 && lm.out_channels != c) {
        throw ValidationError(id, "dependency group members keep different channel counts");
      }
      c = lm.out_channels;
    }
  }
}

// ---- text format -----------------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

long long parse_int(std::string_view s, std::size_t line, std::string_view what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(line, "bad integer '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

std::size_t parse_dim(std::string_view s, std::size_t line, std::string_view what) {
  const long long v = parse_int(s, line, what);
  if (v < 0) throw ParseError(line, std::string(what) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

CompGraph parse_model_spec(std::string_view text) {
  std::vector<GraphNode> nodes;
  std::size_t line_no = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (!header) {
      if (tok.size() != 2 || tok[0] != "stpgraph") {
        throw ParseError(line_no, "expected header 'stpgraph v1'");
      }
      if (tok[1] != "v1") {
        throw ParseError(line_no, "unsupported format version '" + std::string(tok[1]) + "'");
      }
      header = true;
      continue;
    }
    if (tok.size() < 2) throw ParseError(line_no, "expected '<id> <kind> [key=value ...]'");
    GraphNode n;
    n.id = static_cast<int>(parse_int(tok[0], line_no, "node id"));
    auto kind = kind_from_name(tok[1]);
    if (!kind) throw ParseError(line_no, "unknown node kind '" + std::string(tok[1]) + "'");
    n.kind = *kind;
    if (n.kind == NodeKind::kMaxPool) n.attrs.kernel = 2, n.attrs.stride = 2;
    bool has_in = false, has_out = false, has_bias = false;
    for (std::size_t k = 2; k < tok.size(); ++k) {
      const auto eq = tok[k].find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw ParseError(line_no, "expected key=value, got '" + std::string(tok[k]) + "'");
      }
      const std::string_view key = tok[k].substr(0, eq);
      const std::string_view val = tok[k].substr(eq + 1);
      if (key == "from") {
        for (auto part : split_on(val, ','))
          n.inputs.push_back(static_cast<int>(parse_int(part, line_no, "from")));
      } else if (key == "shape") {
        for (auto part : split_on(val, 'x')) n.attrs.shape.push_back(parse_dim(part, line_no, "shape"));
      } else if (key == "in") {
        n.attrs.in = parse_dim(val, line_no, key);
        has_in = true;
      } else if (key == "out") {
        n.attrs.out = parse_dim(val, line_no, key);
        has_out = true;
      } else if (key == "k") {
        n.attrs.kernel = parse_dim(val, line_no, key);
      } else if (key == "stride") {
        n.attrs.stride = parse_dim(val, line_no, key);
      } else if (key == "pad") {
        n.attrs.padding = parse_dim(val, line_no, key);
      } else if (key == "bias") {
        n.attrs.bias = parse_int(val, line_no, key) != 0;
        has_bias = true;
      } else if (key == "stage") {
        n.stage = static_cast<int>(parse_int(val, line_no, key));
        n.prunable = true;
      } else if (key == "block") {
        n.block = static_cast<int>(parse_int(val, line_no, key));
      } else {
        throw ParseError(line_no, "unknown attribute '" + std::string(key) + "'");
      }
    }
    if (is_layer(n.kind) && (!has_in || !has_out)) {
      throw ParseError(line_no, std::string(kind_name(n.kind)) + " needs in= and out=");
    }
    // Linear layers carry a bias unless bias=0 is given.
    if (n.kind == NodeKind::kLinear && !has_bias) n.attrs.bias = true;
    if (n.prunable && n.block < 0) n.block = 0;
    nodes.push_back(std::move(n));
    if (eol == text.size()) break;
  }
  if (!header) throw ParseError(line_no, "missing header 'stpgraph v1'");
  return CompGraph::build(std::move(nodes));
}

CompGraph load_model_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_spec(ss.str());
}

std::string to_model_spec(const CompGraph& graph) {
  std::ostringstream os;
  os << "stpgraph v1\n";
  for (const GraphNode& n : graph.nodes()) {
    os << n.id << ' ' << kind_name(n.kind);
    if (!n.inputs.empty()) {
      os << " from=";
      for (std::size_t k = 0; k < n.inputs.size(); ++k) os << (k ? "," : "") << n.inputs[k];
    }
    const NodeAttrs& a = n.attrs;
    switch (n.kind) {
      case NodeKind::kInput:
        os << " shape=";
        for (std::size_t k = 0; k < a.shape.size(); ++k) os << (k ? "x" : "") << a.shape[k];
        break;
      case NodeKind::kLinear:
        os << " in=" << a.in << " out=" << a.out << " bias=" << (a.bias ? 1 : 0);
        break;
      case NodeKind::kConv2d:
        os << " in=" << a.in << " out=" << a.out << " k=" << a.kernel << " stride=" << a.stride
           << " pad=" << a.padding << " bias=" << (a.bias ? 1 : 0);
        break;
      case NodeKind::kMaxPool:
        os << " k=" << a.kernel << " stride=" << a.stride << " pad=" << a.padding;
        break;
      default:
        break;
    }
    if (n.prunable) os << " stage=" << n.stage << " block=" << n.block;
    os << '\n';
  }
  return os.str();
}

}  // namespace stp
