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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace stp {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
  }
}

Dataset take(const Tensor& x, const std::vector<int>& y, std::size_t K,
             std::span<const std::size_t> rows, std::string split) {
  Dataset d;
  Shape s = x.shape();
  s[0] = rows.size();
  const std::size_t inner = x.numel() / x.dim(0);
  std::vector<double> vals;
  vals.reserve(rows.size() * inner);
  for (std::size_t r : rows) {
    const double* p = x.data() + r * inner;
    vals.insert(vals.end(), p, p + inner);
    d.labels.push_back(y[r]);
  }
  d.features = Tensor(s, std::move(vals));
  d.num_classes = K;
  d.split = std::move(split);
  return d;
}

}  // namespace

Shape Dataset::sample_shape() const {
  const Shape& s = features.shape();
  return Shape(s.begin() + 1, s.end());
}

std::pair<Dataset, Dataset> gen_gaussian_clusters(std::size_t K, std::size_t N,
                                                  const Shape& sample_shape, double spread,
                                                  std::uint64_t seed) {
  if (K < 2) throw DataError("gen_gaussian_clusters: need K >= 2");
  if (N < 2 * K) throw DataError("gen_gaussian_clusters: need N >= 2K");
  if (sample_shape.empty() || shape_numel(sample_shape) == 0) {
    throw DataError("gen_gaussian_clusters: invalid sample shape " + shape_str(sample_shape));
  }
  if (!(spread >= 0.0)) throw DataError("gen_gaussian_clusters: spread must be >= 0");
  Rng rng(seed);
  const std::size_t F = shape_numel(sample_shape);
  std::vector<double> means(K * F);
  for (double& m : means) m = rng.normal();
  Shape full = {N};
  full.insert(full.end(), sample_shape.begin(), sample_shape.end());
  Tensor x(full);
  std::vector<int> y(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t c = i % K;
    y[i] = static_cast<int>(c);
    for (std::size_t f = 0; f < F; ++f) x[i * F + f] = means[c * F + f] + spread * rng.normal();
  }
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  const std::size_t n_train = N * 4 / 5;
  const std::span<const std::size_t> all(order);
  return {take(x, y, K, all.subspan(0, n_train), "train"),
          take(x, y, K, all.subspan(n_train), "test")};
}

Dataset load_csv(const std::string& path, const Shape& sample_shape, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::size_t F = shape_numel(sample_shape);
  if (sample_shape.empty() || F == 0) throw DataError("invalid sample shape");
  std::vector<double> vals;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto fail = [&](const std::string& msg) {
      return DataError(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (fields.size() != F + 1) {
      throw fail("expected " + std::to_string(F + 1) + " fields, got " +
                 std::to_string(fields.size()));
    }
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
      return s;
    };
    const auto lab = trim(fields[0]);
    int label = 0;
    auto [lp, lec] = std::from_chars(lab.data(), lab.data() + lab.size(), label);
    if (lec != std::errc() || lp != lab.data() + lab.size()) throw fail("bad label");
    if (label < 0 || (num_classes && static_cast<std::size_t>(label) >= num_classes)) {
      throw fail("label " + std::to_string(label) + " out of range");
    }
    labels.push_back(label);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto v = trim(fields[f]);
      double d = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
      if (ec != std::errc() || p != v.data() + v.size()) {
        throw fail("bad value in field " + std::to_string(f + 1));
      }
      vals.push_back(d);
    }
  }
  if (labels.empty()) throw DataError(path + ": no rows");
  Dataset d;
  d.num_classes = num_classes
                      ? num_classes
                      : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  Shape s = {labels.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  d.features = Tensor(s, std::move(vals));
  d.labels = std::move(labels);
  d.split = "csv";
  return d;
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  const std::size_t F = data.size() ? data.features.numel() / data.size() : 0;
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (std::size_t f = 0; f < F; ++f) {
      std::snprintf(buf, sizeof buf, "%.17g", data.features[i * F + f]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b;
  Shape s = data.features.shape();
  s[0] = rows.size();
  const std::size_t F = data.features.numel() / data.features.dim(0);
  std::vector<double> vals;
  vals.reserve(rows.size() * F);
  for (std::size_t r : rows) {
    if (r >= data.size()) throw DataError("gather: row out of range");
    const double* p = data.features.data() + r * F;
    vals.insert(vals.end(), p, p + F);
    b.y.push_back(data.labels[r]);
  }
  b.x = Tensor(s, std::move(vals));
  return b;
}

BatchStream::BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_(batch_size), rng_(seed), order_(n) {
  if (n == 0 || batch_size == 0) throw DataError("BatchStream: empty dataset or batch");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchStream::reshuffle() { shuffle(order_, rng_); }

std::vector<std::size_t> BatchStream::next() {
  if (pos_ >= n_) {
    reshuffle();
    pos_ = 0;
    ++epoch_;
  }
  const std::size_t end = std::min(n_, pos_ + batch_);
  std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  return rows;
}

}  // namespace stp
