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

#include "stp/arch.hpp"

#include <map>

#include "gtest/gtest.h"
#include "stp/models.hpp"

namespace {

using stp::ArchSpace;
using stp::ArchSpec;
using stp::Rng;

TEST(ArchTest, FormatAndParseRoundTrip) {
  const ArchSpec a{{2, 3, 4, 2}, {0.3, 0.3, 0.3, 0.7}};
  EXPECT_EQ(stp::format_arch(a), "((2, 3, 4, 2), (0.3, 0.3, 0.3, 0.7))");
  EXPECT_EQ(stp::parse_arch(stp::format_arch(a)), a);
  const ArchSpec one{{1}, {1.0}};
  EXPECT_EQ(stp::format_arch(one), "((1,), (1.0,))");
  EXPECT_EQ(stp::parse_arch("((1,),(1.0,))"), one);
  EXPECT_EQ(stp::parse_arch(" ( (1, 2) , (0.5, 1) ) "), (ArchSpec{{1, 2}, {0.5, 1.0}}));
}

TEST(ArchTest, ParseRejectsMalformedText) {
  for (const char* bad : {"", "((1, 2), (0.5))", "((1, 2), (0.5, 1.0)", "((a), (1.0))",
                          "((1), (1.0)) x", "(1, 2)"}) {
    EXPECT_THROW(stp::parse_arch(bad), std::invalid_argument) << bad;
  }
}

TEST(ArchTest, KeptChannelsRoundsHalfUpAndKeepsOne) {
  EXPECT_EQ(stp::kept_channels(0.3, 8), 2u);
  EXPECT_EQ(stp::kept_channels(0.5, 8), 4u);
  EXPECT_EQ(stp::kept_channels(0.7, 8), 6u);
  EXPECT_EQ(stp::kept_channels(0.3, 64), 19u);
  EXPECT_EQ(stp::kept_channels(0.3, 1), 1u);
  EXPECT_EQ(stp::kept_channels(1.0, 16), 16u);
}

TEST(ArchTest, WidthGridValidation) {
  EXPECT_THROW(stp::WidthGrid({0.5, 0.3, 1.0}), stp::ArchError);
  EXPECT_THROW(stp::WidthGrid({0.3, 0.5}), stp::ArchError);
  EXPECT_THROW(stp::WidthGrid({0.0, 1.0}), stp::ArchError);
  const stp::WidthGrid g;
  EXPECT_EQ(g.index_of(0.7), 2u);
  EXPECT_THROW(g.index_of(0.6), stp::ArchError);
}

TEST(ArchTest, CheckRejectsArchsOutsideTheSpace) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  EXPECT_NO_THROW(space.check(space.full()));
  EXPECT_THROW(space.check({{1, 1, 1}, {0.3, 0.3, 0.3}}), stp::ArchError);
  EXPECT_THROW(space.check({{0, 1, 1, 1}, {0.3, 0.3, 0.3, 0.3}}), stp::ArchError);
  EXPECT_THROW(space.check({{3, 1, 1, 1}, {0.3, 0.3, 0.3, 0.3}}), stp::ArchError);
  EXPECT_THROW(space.check({{1, 1, 1, 1}, {0.4, 0.3, 0.3, 0.3}}), stp::ArchError);
}

TEST(ArchTest, FullArchHasUnitRatios) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  EXPECT_EQ(space.full(), (ArchSpec{{2, 2, 2, 2}, {1.0, 1.0, 1.0, 1.0}}));
  EXPECT_DOUBLE_EQ(space.flops_ratio(space.full()), 1.0);
  EXPECT_DOUBLE_EQ(space.params_ratio(space.full()), 1.0);
}

TEST(ArchTest, ResNet50CostAnchors) {
  const stp::CompGraph g = stp::load_model("resnet50_cifar");
  const stp::Shape in{3, 32, 32};
  struct Row {
    ArchSpec arch;
    double flops;
  };
  const Row rows[] = {
      {{{2, 3, 4, 2}, {0.3, 0.3, 0.3, 0.7}}, 0.1489},
      {{{2, 3, 5, 2}, {0.3, 0.3, 0.3, 0.7}}, 0.1488},
      {{{1, 3, 6, 2}, {0.3, 0.3, 0.3, 0.7}}, 0.1469},
      {{{1, 2, 5, 2}, {0.5, 0.3, 0.3, 0.7}}, 0.1522},
      {{{2, 2, 6, 2}, {0.3, 0.3, 0.3, 0.7}}, 0.1523},
  };
  for (const Row& r : rows) {
    EXPECT_NEAR(stp::flops_ratio(g, r.arch, in), r.flops, 0.015) << stp::format_arch(r.arch);
  }
  EXPECT_NEAR(stp::params_ratio(g, rows[0].arch, in), 0.2194, 0.015);
}

TEST(ArchTest, SampledArchsLieInTheBand) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const ArchSpec a = space.sample(0.15, 0.03, rng);
    EXPECT_NO_THROW(space.check(a));
    const double f = space.flops_ratio(a);
    EXPECT_GE(f, 0.15 * 0.97);
    EXPECT_LE(f, 0.15 * 1.03);
  }
  EXPECT_EQ(space.sample(1.0, 0.03, rng), space.full());
}

TEST(ArchTest, InfeasibleBandReportsNearestRatio) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  Rng rng(2);
  try {
    space.sample(0.001, 0.01, rng, 500);
    FAIL();
  } catch (const stp::InfeasibleError& e) {
    EXPECT_GT(e.nearest(), 0.001);
    EXPECT_LT(e.nearest(), 0.2);
  }
}

TEST(ArchTest, SamplingIsSeedDeterministic) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  Rng a(3), b(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(space.sample(0.15, 0.03, a), space.sample(0.15, 0.03, b));
}

TEST(ArchTest, MutateExpandContainsTheTarget) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const ArchSpec t = space.sample(0.15, 0.03, rng);
    const ArchSpec s = space.mutate_expand(t, rng);
    EXPECT_TRUE(space.contains(s, t));
    for (std::size_t k = 0; k < t.depths.size(); ++k) {
      EXPECT_GE(s.depths[k], t.depths[k]);
      EXPECT_GE(s.widths[k], t.widths[k]);
    }
  }
  EXPECT_EQ(space.mutate_expand(space.full(), rng), space.full());
}

TEST(ArchTest, MutateExpandIsUniformOverLargerChoices) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  Rng rng(5);
  const ArchSpec t{{1, 1, 1, 1}, {0.5, 0.3, 0.3, 0.3}};
  const int n = 20000;
  std::map<double, int> widths;
  std::map<int, int> depths;
  for (int i = 0; i < n; ++i) {
    const ArchSpec s = space.mutate_expand(t, rng);
    ++widths[s.widths[0]];
    ++depths[s.depths[0]];
  }
  // Stage 0 from width 0.5: {0.5, 0.7, 0.9, 1.0}; depth from 1: {1, 2}.
  ASSERT_EQ(widths.size(), 4u);
  for (auto [w, c] : widths) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 0.02) << w;
  ASSERT_EQ(depths.size(), 2u);
  for (auto [d, c] : depths) EXPECT_NEAR(static_cast<double>(c) / n, 0.5, 0.02) << d;
}

TEST(ArchTest, ContainsIsAPartialOrder) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  const ArchSpec small{{1, 1, 1, 1}, {0.3, 0.3, 0.3, 0.3}};
  const ArchSpec wide{{1, 1, 1, 1}, {1.0, 1.0, 1.0, 1.0}};
  const ArchSpec deep{{2, 2, 2, 2}, {0.3, 0.3, 0.3, 0.3}};
  EXPECT_TRUE(space.contains(wide, small));
  EXPECT_TRUE(space.contains(deep, small));
  EXPECT_FALSE(space.contains(small, wide));
  EXPECT_FALSE(space.contains(wide, deep));
  EXPECT_FALSE(space.contains(deep, wide));
  EXPECT_TRUE(space.contains(small, small));
}

TEST(ArchTest, MaskWidthsFollowGroups) {
  const ArchSpace space(stp::load_model("toy_resnet"));
  const stp::StructMask m = space.mask({{1, 2, 2, 2}, {0.5, 1.0, 1.0, 1.0}});
  EXPECT_EQ(m.at(3).out_channels, 4u);
  EXPECT_EQ(m.at(5).out_channels, 4u);
  EXPECT_EQ(m.at(6).out_channels, 4u);
  EXPECT_FALSE(m.at(9).kept);
  EXPECT_FALSE(m.at(11).kept);
  EXPECT_EQ(m.at(1).out_channels, 8u);
}

}  // namespace
