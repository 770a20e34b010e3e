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

#ifndef STP_DATA_HPP_
#define STP_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stp/rng.hpp"
#include "stp/tensor.hpp"

namespace stp {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Tensor features;  // [N, ...sample shape]
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::string split;

  std::size_t size() const { return labels.size(); }
  Shape sample_shape() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// K seeded class means with i.i.d. N(0, 1) entries; each sample is its class
// mean plus spread * N(0, 1) noise. Classes are balanced (label = i mod K)
// and a seeded shuffle puts the first 80% in train, the rest in test.
std::pair<Dataset, Dataset> gen_gaussian_clusters(std::size_t K, std::size_t N,
                                                  const Shape& sample_shape, double spread,
                                                  std::uint64_t seed);

// Rows: label, then the row-major feature values. num_classes = 0 infers
// max label + 1. Errors name the 1-based line.
Dataset load_csv(const std::string& path, const Shape& sample_shape, std::size_t num_classes = 0);
void write_csv(const std::string& path, const Dataset& data);

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch gather(const Dataset& data, std::span<const std::size_t> rows);

// Seed-shuffled epochs of fixed-size batches; the last partial batch is kept.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  // Row indices of the next batch, starting a new shuffled epoch as needed.
  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace stp

#endif  // STP_DATA_HPP_
