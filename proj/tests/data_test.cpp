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

#include "stp/data.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "gtest/gtest.h"

namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("stp_data_test_" + name);
}

TEST(DataTest, ClusterShapesAndSplit) {
  const auto [train, test] = stp::gen_gaussian_clusters(10, 2000, {1, 8, 8}, 1.0, 1);
  EXPECT_EQ(train.features.shape(), stp::Shape({1600, 1, 8, 8}));
  EXPECT_EQ(test.features.shape(), stp::Shape({400, 1, 8, 8}));
  EXPECT_EQ(train.split, "train");
  EXPECT_EQ(test.split, "test");
  EXPECT_EQ(train.num_classes, 10u);
  std::map<int, int> counts;
  for (int y : train.labels) ++counts[y];
  for (int y : test.labels) ++counts[y];
  ASSERT_EQ(counts.size(), 10u);
  for (auto [y, c] : counts) EXPECT_EQ(c, 200) << y;
}

TEST(DataTest, ClustersAreSeedDeterministic) {
  const auto a = stp::gen_gaussian_clusters(3, 60, {4}, 0.5, 9);
  const auto b = stp::gen_gaussian_clusters(3, 60, {4}, 0.5, 9);
  const auto c = stp::gen_gaussian_clusters(3, 60, {4}, 0.5, 10);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_FALSE(a.first == c.first);
}

TEST(DataTest, ZeroSpreadSamplesSitOnTheirMean) {
  const auto [train, test] = stp::gen_gaussian_clusters(2, 20, {3}, 0.0, 2);
  std::map<int, std::vector<double>> mean;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::vector<double> row(train.features.data() + 3 * i, train.features.data() + 3 * i + 3);
    auto [it, fresh] = mean.emplace(train.labels[i], row);
    if (!fresh) EXPECT_EQ(it->second, row);
  }
}

TEST(DataTest, GeneratorRejectsBadArguments) {
  EXPECT_THROW(stp::gen_gaussian_clusters(1, 10, {2}, 1.0, 0), stp::DataError);
  EXPECT_THROW(stp::gen_gaussian_clusters(10, 10, {2}, 1.0, 0), stp::DataError);
  EXPECT_THROW(stp::gen_gaussian_clusters(2, 10, {}, 1.0, 0), stp::DataError);
  EXPECT_THROW(stp::gen_gaussian_clusters(2, 10, {2}, -1.0, 0), stp::DataError);
}

TEST(DataTest, CsvRoundTripIsExact) {
  const auto [train, test] = stp::gen_gaussian_clusters(4, 40, {2, 3}, 1.3, 5);
  const fs::path p = temp_path("roundtrip.csv");
  stp::write_csv(p.string(), train);
  stp::Dataset back = stp::load_csv(p.string(), {2, 3}, 4);
  back.split = train.split;
  EXPECT_EQ(back, train);
  fs::remove(p);
}

TEST(DataTest, CsvErrorsNameTheLine) {
  const fs::path p = temp_path("bad.csv");
  {
    std::ofstream out(p);
    out << "0,1.0,2.0\n1,3.0\n";
  }
  try {
    stp::load_csv(p.string(), {2});
    FAIL();
  } catch (const stp::DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  {
    std::ofstream out(p);
    out << "0,1.0,2.0\n5,3.0,x\n";
  }
  EXPECT_THROW(stp::load_csv(p.string(), {2}), stp::DataError);
  {
    std::ofstream out(p);
    out << "0,1.0,2.0\n5,3.0,4.0\n";
  }
  EXPECT_THROW(stp::load_csv(p.string(), {2}, 3), stp::DataError);
  EXPECT_EQ(stp::load_csv(p.string(), {2}).num_classes, 6u);
  fs::remove(p);
  EXPECT_THROW(stp::load_csv(p.string(), {2}), stp::DataError);
}

TEST(DataTest, GatherCopiesRows) {
  const auto [train, test] = stp::gen_gaussian_clusters(2, 10, {3}, 1.0, 6);
  const std::vector<std::size_t> rows{4, 0};
  const stp::Batch b = stp::gather(train, rows);
  EXPECT_EQ(b.x.shape(), stp::Shape({2, 3}));
  EXPECT_EQ(b.y, std::vector<int>({train.labels[4], train.labels[0]}));
  EXPECT_EQ(b.x[0], train.features[12]);
  EXPECT_EQ(b.x[5], train.features[2]);
  const std::vector<std::size_t> bad{8};
  EXPECT_THROW(stp::gather(train, bad), stp::DataError);
}

TEST(DataTest, BatchStreamCoversEveryRowOncePerEpoch) {
  stp::BatchStream s(10, 4, 7);
  EXPECT_EQ(s.batches_per_epoch(), 3u);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    std::multiset<std::size_t> seen;
    std::vector<std::size_t> sizes;
    for (std::size_t b = 0; b < 3; ++b) {
      const auto rows = s.next();
      sizes.push_back(rows.size());
      seen.insert(rows.begin(), rows.end());
    }
    EXPECT_EQ(sizes, std::vector<std::size_t>({4, 4, 2}));
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 10u);
  }
  EXPECT_THROW(stp::BatchStream(0, 4, 1), stp::DataError);
}

}  // namespace
