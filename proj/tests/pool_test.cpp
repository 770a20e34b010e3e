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

#include "stp/pool.hpp"

#include <set>

#include "gtest/gtest.h"
#include "stp/models.hpp"

namespace {

using stp::ArchSpec;
using stp::Pool;
using stp::PoolSchedule;
using stp::Rng;

std::vector<ArchSpec> distinct_archs(std::size_t n) {
  std::vector<ArchSpec> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({{static_cast<int>(i) + 1}, {1.0}});
  return out;
}

TEST(PoolTest, ShrinkCountExamples) {
  EXPECT_EQ(stp::shrink_count(391, 1000, 39100), 9);
  EXPECT_EQ(stp::shrink_count(100, 101, 1000), 10);
  EXPECT_EQ(stp::shrink_count(250, 16, 3000), 1);
  EXPECT_EQ(stp::shrink_count(10, 2, 1000), 0);
  EXPECT_THROW(stp::shrink_count(0, 16, 3000), std::invalid_argument);
  EXPECT_THROW(stp::shrink_count(10, 16, 0), std::invalid_argument);
}

TEST(PoolTest, ShrinkCountMatchesIntegerFloorOnRandomTriples) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const long long k = rng.uniform_int(1, 500);
    const long long np = rng.uniform_int(1, 2000);
    const long long ts = rng.uniform_int(1, 50000);
    // Exact rational floor: the largest q with q * T_shr <= k (N_p - 1).
    long long q = 0;
    while ((q + 1) * ts <= k * (np - 1)) ++q;
    EXPECT_EQ(stp::shrink_count(k, np, ts), q) << k << " " << np << " " << ts;
  }
}

TEST(PoolTest, FinalShrinkStep) {
  EXPECT_EQ(stp::final_shrink_step(250, 3000), 3000);
  EXPECT_EQ(stp::final_shrink_step(7, 20), 14);
  EXPECT_EQ(stp::final_shrink_step(50, 20), 20);
}

TEST(PoolTest, ConstructorValidates) {
  EXPECT_THROW(Pool({}, {}), std::invalid_argument);
  EXPECT_THROW(Pool({{{1}, {1.0}}, {{1}, {1.0}}}, {}), std::invalid_argument);
  EXPECT_THROW(Pool(distinct_archs(2), {.k = 1, .T_shr = 1, .alpha = 1.0}), std::invalid_argument);
}

TEST(PoolTest, EmaUpdate) {
  Pool pool(distinct_archs(2), {.k = 1, .T_shr = 10, .alpha = 0.3});
  stp::update_score(pool, 0, 0.5);
  EXPECT_EQ(pool.entries()[0].score, 0.5);
  stp::update_score(pool, 0, 0.7);
  EXPECT_NEAR(*pool.entries()[0].score, 0.56, 1e-15);
  EXPECT_EQ(pool.entries()[0].updates, 2u);
  EXPECT_FALSE(pool.entries()[1].score.has_value());
  EXPECT_THROW(stp::update_score(pool, 1, std::nan("")), std::invalid_argument);

  Pool literal(distinct_archs(1), {.k = 1, .T_shr = 10, .alpha = 0.3, .literal_ema = true});
  stp::update_score(literal, 0, 0.5);
  stp::update_score(literal, 0, 0.7);
  EXPECT_NEAR(*literal.entries()[0].score, 1.0 - 0.3 * 0.5 + 0.3 * 0.7, 1e-15);
}

TEST(PoolTest, ShrinkRemovesHighestScoresLargerIndexFirst) {
  Pool pool(distinct_archs(5), {.k = 1, .T_shr = 10});
  const double s[] = {0.1, 0.5, 0.5, 0.2};
  for (std::size_t i = 0; i < 4; ++i) stp::update_score(pool, i, s[i]);
  Rng rng(2);
  const auto removed = stp::shrink(pool, 2, rng);
  ASSERT_EQ(removed.size(), 2u);
  EXPECT_EQ(removed[0].index, 2u);
  EXPECT_EQ(removed[1].index, 1u);
  // Entry 4 is unscored and therefore exempt.
  ASSERT_EQ(pool.size(), 3u);
  EXPECT_EQ(pool.entries()[0].arch.depths[0], 1);
  EXPECT_EQ(pool.entries()[1].arch.depths[0], 4);
  EXPECT_EQ(pool.entries()[2].arch.depths[0], 5);
}

TEST(PoolTest, ShrinkNeverEmptiesAndFinalKeepsTheMinimum) {
  Pool pool(distinct_archs(4), {.k = 1, .T_shr = 10});
  const double s[] = {0.4, 0.1, 0.3, 0.2};
  for (std::size_t i = 0; i < 4; ++i) stp::update_score(pool, i, s[i]);
  Rng rng(3);
  Pool copy = pool;
  stp::shrink(copy, 10, rng);
  EXPECT_EQ(copy.size(), 1u);
  EXPECT_EQ(copy.entries()[0].arch.depths[0], 2);
  const auto removed = stp::shrink(pool, 0, rng, true);
  EXPECT_EQ(removed.size(), 3u);
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_EQ(pool.entries()[0].arch.depths[0], 2);
}

TEST(PoolTest, AllUnscoredShrinksUniformly) {
  std::vector<int> hits(4, 0);
  Rng rng(4);
  for (int i = 0; i < 4000; ++i) {
    Pool pool(distinct_archs(4), {.k = 1, .T_shr = 10});
    ++hits[static_cast<std::size_t>(stp::shrink(pool, 1, rng).at(0).index)];
  }
  for (int h : hits) EXPECT_NEAR(h / 4000.0, 0.25, 0.03);
}

TEST(PoolTest, SamplingPrefersUnscoredEntries) {
  Pool pool(distinct_archs(3), {.k = 1, .T_shr = 10});
  stp::update_score(pool, 0, 1.0);
  stp::update_score(pool, 2, 1.0);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(stp::sample_from_pool(pool, rng), 1u);
  stp::update_score(pool, 1, 1.0);
  std::set<std::size_t> seen;
  for (int i = 0; i < 100; ++i) seen.insert(stp::sample_from_pool(pool, rng));
  EXPECT_EQ(seen.size(), 3u);
}

TEST(PoolTest, JsonRoundTrip) {
  Pool pool({{{1, 2}, {0.3, 0.5}}, {{2, 2}, {1.0, 0.7}}}, {.k = 5, .T_shr = 40, .alpha = 0.25});
  stp::update_score(pool, 1, 0.125);
  const Pool back = Pool::from_json(pool.to_json());
  EXPECT_EQ(back.to_json(), pool.to_json());
  EXPECT_EQ(back.initial_size(), 2u);
  EXPECT_EQ(back.entries()[1].score, 0.125);
  EXPECT_FALSE(back.entries()[0].score.has_value());
  EXPECT_THROW(Pool::from_json("{}"), std::exception);
}

TEST(PoolTest, InitPoolIsDistinctAndInBand) {
  const stp::ArchSpace space(stp::load_model("toy_resnet"));
  Rng rng(6);
  const Pool pool = stp::init_pool(16, space, 0.15, 0.03, rng, {.k = 250, .T_shr = 3000});
  ASSERT_EQ(pool.size(), 16u);
  std::set<ArchSpec> seen;
  for (const auto& e : pool.entries()) {
    EXPECT_TRUE(seen.insert(e.arch).second);
    EXPECT_NEAR(space.flops_ratio(e.arch), 0.15, 0.15 * 0.03 + 1e-12);
    EXPECT_FALSE(e.score.has_value());
  }
}

// The trainer's schedule loop on 20 triples: every run ends with one entry.
TEST(PoolTest, ScheduleAlwaysEndsWithOneEntry) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const long long k = rng.uniform_int(1, 40);
    const auto np = static_cast<std::size_t>(rng.uniform_int(1, 60));
    const long long ts = rng.uniform_int(1, 400);
    Pool pool(distinct_archs(np), {.k = k, .T_shr = ts});
    for (long long t = 1; t <= ts + k; ++t) {
      stp::update_score(pool, stp::sample_from_pool(pool, rng), rng.uniform());
      if (pool.is_shrink_step(t)) {
        stp::shrink(pool, static_cast<std::size_t>(pool.n_shr()), rng, pool.is_final_shrink_step(t));
      }
      ASSERT_GE(pool.size(), 1u);
    }
    EXPECT_EQ(pool.size(), 1u) << k << " " << np << " " << ts;
  }
}

}  // namespace
