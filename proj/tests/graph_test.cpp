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

#include <string>

#include "gtest/gtest.h"
#include "stp/cost.hpp"
#include "stp/models.hpp"

namespace {

using stp::CompGraph;
using stp::NodeKind;

constexpr char kLinear[] = R"(stpgraph v1
0 input shape=4
1 linear from=0 in=4 out=3 bias=1
2 output from=1
)";

TEST(GraphTest, ParsesAndRoundTrips) {
  const CompGraph g = stp::parse_model_spec(stp::mlp_spec());
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.node(1).kind, NodeKind::kLinear);
  EXPECT_EQ(g.prunable_layers(), std::vector<int>({1}));
  EXPECT_EQ(g.layers(), std::vector<int>({1, 3}));
  EXPECT_EQ(g.full_shape(3), stp::Shape({10}));
  EXPECT_EQ(stp::to_model_spec(g), stp::mlp_spec());
  const CompGraph toy = stp::load_model("toy_resnet");
  EXPECT_EQ(stp::to_model_spec(stp::parse_model_spec(stp::to_model_spec(toy))),
            stp::to_model_spec(toy));
}

TEST(GraphTest, CommentsAndBlankLinesAreIgnored) {
  const CompGraph g = stp::parse_model_spec(
      "# a comment\nstpgraph v1\n\n0 input shape=4\n1 linear from=0 in=4 out=3 bias=1\n"
      "2 output from=1\n");
  EXPECT_EQ(g.size(), 3u);
}

TEST(GraphTest, ParseErrorsNameTheLine) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      stp::parse_model_spec(text);
    } catch (const stp::ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("stpgraph v2\n"), 1u);
  EXPECT_EQ(line_of("stpgraph v1\n0 input shape=4\n1 frobnicate from=0\n"), 3u);
  EXPECT_EQ(line_of("stpgraph v1\n0 input shape=4\n1 linear from=0 in=4\n"), 3u);
  EXPECT_EQ(line_of("stpgraph v1\n0 input shape=4\n1 linear from=0 in=x out=3\n"), 3u);
  EXPECT_EQ(line_of("stpgraph v1\n0 input shape=4\n1 relu from=0 color=red\n"), 3u);
}

TEST(GraphTest, ValidationErrorsNameTheNode) {
  auto node_of = [](const std::string& body) -> int {
    try {
      stp::parse_model_spec("stpgraph v1\n0 input shape=4\n" + body);
    } catch (const stp::ValidationError& e) {
      return e.node();
    }
    return -100;
  };
  // Shape mismatch.
  EXPECT_EQ(node_of("1 linear from=0 in=5 out=3\n2 output from=1\n"), 1);
  // Forward edge.
  EXPECT_EQ(node_of("1 relu from=2\n2 output from=1\n"), 1);
  // Add of unequal widths.
  EXPECT_EQ(node_of("1 linear from=0 in=4 out=3\n2 add from=0,1\n3 output from=2\n"), 2);
  // Only layers can be prunable.
  EXPECT_EQ(node_of("1 relu from=0 stage=0\n2 output from=1\n"), 1);
  // Missing output.
  EXPECT_EQ(node_of("1 relu from=0\n"), -1);
}

TEST(GraphTest, ToyResNetStagesAndGroups) {
  const CompGraph g = stp::load_model("toy_resnet");
  ASSERT_EQ(g.stages().size(), 4u);
  for (const auto& s : g.stages()) EXPECT_EQ(s.size(), 2u);
  // Block 0 of stage 0: two 3x3 convs and the projection.
  EXPECT_EQ(g.stages()[0].blocks[0], std::vector<int>({3, 5, 6}));
  // Each stage: the projection, the first block's second conv and the second
  // block's second conv meet at adds; the first convs stay singletons.
  std::size_t coupled = 0;
  for (const auto& grp : g.groups()) {
    EXPECT_FALSE(grp.pinned);
    if (grp.members.size() > 1) {
      ++coupled;
      EXPECT_EQ(grp.members.size(), 3u);
      EXPECT_EQ(g.node(grp.reason).kind, NodeKind::kAdd);
    }
  }
  EXPECT_EQ(coupled, 4u);
  EXPECT_EQ(g.groups()[g.group_of(5)].members, std::vector<int>({5, 6, 11}));
}

TEST(GraphTest, ResNet50Structure) {
  const CompGraph g = stp::load_model("resnet50_cifar");
  std::size_t convs = 0;
  for (const auto& n : g.nodes()) convs += n.kind == NodeKind::kConv2d;
  EXPECT_EQ(convs, 53u);
  EXPECT_EQ(g.prunable_layers().size(), 52u);
  EXPECT_EQ(g.layers().size(), 54u);
  ASSERT_EQ(g.stages().size(), 4u);
  const std::size_t sizes[] = {3, 4, 6, 3};
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(g.stages()[s].size(), sizes[s]);
  EXPECT_EQ(g.full_shape(g.output_id()), stp::Shape({100}));
}

TEST(GraphTest, ConcatProducersStayIndependent) {
  const CompGraph g = stp::parse_model_spec(R"(stpgraph v1
0 input shape=2x4x4
1 conv2d from=0 in=2 out=3 k=1 stage=0 block=0
2 conv2d from=0 in=2 out=5 k=1 stage=0 block=0
3 concat from=1,2
4 global_pool from=3
5 linear from=4 in=8 out=2
6 output from=5
)");
  EXPECT_NE(g.group_of(1), g.group_of(2));
  EXPECT_EQ(g.full_shape(3), stp::Shape({8, 4, 4}));
}

TEST(GraphTest, FixedProducerPinsItsGroup) {
  const CompGraph g = stp::parse_model_spec(R"(stpgraph v1
0 input shape=4
1 linear from=0 in=4 out=4
2 linear from=1 in=4 out=4 stage=0 block=0
3 add from=1,2
4 output from=3
)");
  EXPECT_TRUE(g.groups()[g.group_of(2)].pinned);
}

TEST(MaskTest, CheckMaskRejectsBadMasks) {
  const CompGraph g = stp::load_model("toy_resnet");
  stp::StructMask m = stp::StructMask::full(g);
  EXPECT_NO_THROW(stp::check_mask(g, m));
  // Fixed stem narrowed.
  m.at(1).out_channels = 4;
  EXPECT_THROW(stp::check_mask(g, m), stp::ValidationError);
  m = stp::StructMask::full(g);
  // First block skipped.
  for (int id : g.stages()[0].blocks[0]) m.at(id).kept = false;
  EXPECT_THROW(stp::check_mask(g, m), stp::ValidationError);
  m = stp::StructMask::full(g);
  // Coupled members with different widths.
  m.at(5).out_channels = 4;
  EXPECT_THROW(stp::check_mask(g, m), stp::ValidationError);
  m.at(6).out_channels = 4;
  m.at(11).out_channels = 4;
  EXPECT_NO_THROW(stp::check_mask(g, m));
  // Zero kept channels.
  m.at(3).out_channels = 0;
  EXPECT_THROW(stp::check_mask(g, m), stp::ValidationError);
}

// ---- cost -------------------------------------------------------------------

TEST(CostTest, LinearWithBias) {
  // 2 * 4 * 3 MACs-as-FLOPs per sample plus 3 bias adds, batch 2.
  const CompGraph g = stp::parse_model_spec(kLinear);
  const auto c = stp::estimate_cost(g, {2, 4});
  EXPECT_EQ(c.params, 15u);
  EXPECT_EQ(c.flops, 54u);
}

TEST(CostTest, Conv3x3) {
  const CompGraph g = stp::parse_model_spec(R"(stpgraph v1
0 input shape=2x8x8
1 conv2d from=0 in=2 out=4 k=3 pad=1
2 output from=1
)");
  const auto c = stp::estimate_cost(g, {1, 2, 8, 8});
  EXPECT_EQ(c.params, 72u);
  EXPECT_EQ(c.flops, 2u * 2 * 9 * 4 * 64);
}

TEST(CostTest, ElementwiseCountingIsOptIn) {
  const CompGraph g = stp::parse_model_spec(
      "stpgraph v1\n0 input shape=4\n1 linear from=0 in=4 out=3 bias=1\n2 relu from=1\n"
      "3 output from=2\n");
  EXPECT_EQ(stp::estimate_cost(g, {1, 4}).flops, 27u);
  EXPECT_EQ(stp::estimate_cost(g, {1, 4}, nullptr, {.count_elementwise = true}).flops, 30u);
}

TEST(CostTest, HandlerCallsDoNotDependOnTensorSize) {
  const CompGraph g = stp::load_model("resnet50_cifar");
  const auto a = stp::estimate_cost(g, {1, 3, 32, 32});
  const auto b = stp::estimate_cost(g, {64, 3, 32, 32});
  EXPECT_EQ(a.handler_calls, b.handler_calls);
  EXPECT_EQ(b.flops, 64 * a.flops);
  EXPECT_EQ(a.params, b.params);
}

TEST(CostTest, ToyResNetTotals) {
  const CompGraph g = stp::load_model("toy_resnet");
  const auto c = stp::estimate_cost(g, {1, 1, 8, 8});
  EXPECT_EQ(c.flops, 726346u);
  EXPECT_EQ(c.params, 22642u);
}

TEST(CostTest, MaskedCostShrinks) {
  const CompGraph g = stp::parse_model_spec(stp::mlp_spec());
  stp::StructMask m = stp::StructMask::full(g);
  m.at(1).out_channels = 16;
  // Hidden 16: 16*16 + 16 + 16*10 + 10.
  EXPECT_EQ(stp::estimate_cost(g, {1, 16}, &m).params, 442u);
}

}  // namespace
