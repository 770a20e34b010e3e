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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace stp {

namespace {

std::string format_width(double w) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, w);
  std::string s(buf, end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

template <typename T, typename Fmt>
void write_tuple(std::ostringstream& os, const std::vector<T>& xs, Fmt fmt) {
  os << '(';
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? ", " : "") << fmt(xs[i]);
  if (xs.size() == 1) os << ',';
  os << ')';
}

class TupleParser {
 public:
  explicit TupleParser(std::string_view s) : s_(s) {}

  ArchSpec parse() {
    ArchSpec a;
    expect('(');
    const auto depths = numbers();
    expect(',');
    const auto widths = numbers();
    skip_ws();
    if (peek() == ',') ++pos_;
    expect(')');
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    for (double d : depths) {
      if (d != std::floor(d) || d < 1 || d > std::numeric_limits<int>::max()) {
        fail("depths must be positive integers");
      }
      a.depths.push_back(static_cast<int>(d));
    }
    a.widths = widths;
    if (a.depths.size() != a.widths.size()) fail("depth and width tuples differ in length");
    if (a.depths.empty()) fail("empty tuples");
    return a;
  }

 private:
  std::vector<double> numbers() {
    std::vector<double> out;
    expect('(');
    skip_ws();
    if (peek() == ')') {
      ++pos_;
      return out;
    }
    while (true) {
      skip_ws();
      double v = 0;
      const char* b = s_.data() + pos_;
      auto [p, ec] = std::from_chars(b, s_.data() + s_.size(), v);
      if (ec != std::errc() || !std::isfinite(v)) fail("expected a number");
      pos_ += static_cast<std::size_t>(p - b);
      out.push_back(v);
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return out;
      }
      expect(',');
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return out;
      }
    }
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("arch \"" + std::string(s_) + "\": " + msg + " at offset " +
                                std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_arch(const ArchSpec& arch) {
  std::ostringstream os;
  os << '(';
  write_tuple(os, arch.depths, [](int d) { return std::to_string(d); });
  os << ", ";
  write_tuple(os, arch.widths, format_width);
  os << ')';
  return os.str();
}

ArchSpec parse_arch(std::string_view text) { return TupleParser(text).parse(); }

WidthGrid::WidthGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty() || values_.back() != 1.0) {
    throw ArchError("width grid must end at 1.0");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0) || (i > 0 && values_[i] <= values_[i - 1])) {
      throw ArchError("width grid must be strictly increasing in (0, 1]");
    }
  }
}

std::size_t WidthGrid::index_of(double w) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::abs(values_[i] - w) < 1e-9) return i;
  }
  throw ArchError("width " + format_width(w) + " is not on the grid");
}

std::size_t kept_channels(double width, std::size_t channels) {
  const auto k = static_cast<std::size_t>(std::floor(width * static_cast<double>(channels) + 0.5));
  return std::clamp<std::size_t>(k, 1, channels);
}

ArchSpace::ArchSpace(CompGraph graph, WidthGrid grid, Shape input_shape)
    : graph_(std::move(graph)), grid_(std::move(grid)) {
  if (input_shape.empty()) input_shape = graph_.input_shape();
  batch_shape_ = {1};
  batch_shape_.insert(batch_shape_.end(), input_shape.begin(), input_shape.end());
  if (graph_.stages().empty()) throw ArchError("graph has no prunable stages");
  full_cost_ = estimate_cost(graph_, batch_shape_);
}

ArchSpec ArchSpace::full() const {
  ArchSpec a;
  for (const Stage& st : graph_.stages()) {
    a.depths.push_back(static_cast<int>(st.size()));
    a.widths.push_back(1.0);
  }
  return a;
}

void ArchSpace::check(const ArchSpec& arch) const {
  const auto& stages = graph_.stages();
  if (arch.depths.size() != stages.size() || arch.widths.size() != stages.size()) {
    throw ArchError("arch " + format_arch(arch) + " has " + std::to_string(arch.depths.size()) +
                    " stages, graph has " + std::to_string(stages.size()));
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (arch.depths[s] < 1 || static_cast<std::size_t>(arch.depths[s]) > stages[s].size()) {
      throw ArchError("arch " + format_arch(arch) + ": depth of stage " + std::to_string(s) +
                      " must be in [1, " + std::to_string(stages[s].size()) + "]");
    }
    grid_.index_of(arch.widths[s]);
  }
}

StructMask ArchSpace::mask(const ArchSpec& arch) const {
  check(arch);
  return arch_to_mask(arch, graph_);
}

CostReport ArchSpace::cost(const ArchSpec& arch) const {
  const StructMask m = mask(arch);
  return estimate_cost(graph_, batch_shape_, &m);
}

double ArchSpace::flops_ratio(const ArchSpec& arch) const {
  return static_cast<double>(cost(arch).flops) / static_cast<double>(full_cost_.flops);
}

double ArchSpace::params_ratio(const ArchSpec& arch) const {
  return static_cast<double>(cost(arch).params) / static_cast<double>(full_cost_.params);
}

ArchSpec ArchSpace::sample(double r, double eps, Rng& rng, std::size_t max_attempts) const {
  if (!(r > 0.0) || !(eps > 0.0)) throw ArchError("sample: need r > 0 and eps > 0");
  if (r >= 1.0) return full();
  const double lo = r * (1 - eps), hi = r * (1 + eps);
  const auto& stages = graph_.stages();
  double nearest = 0.0, best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    ArchSpec a;
    for (const Stage& st : stages) {
      a.depths.push_back(static_cast<int>(rng.uniform_int(1, static_cast<long long>(st.size()))));
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
      a.widths.push_back(grid_.values()[rng.uniform_index(grid_.size())]);
    }
    const double ratio = flops_ratio(a);
    if (ratio >= lo && ratio <= hi) return a;
    const double gap = ratio < lo ? lo - ratio : ratio - hi;
    if (gap < best_gap) best_gap = gap, nearest = ratio;
  }
  std::ostringstream os;
  os << "no arch with flops ratio in [" << lo << ", " << hi << "] after " << max_attempts
     << " draws; nearest " << nearest;
  throw InfeasibleError(os.str(), nearest);
}

ArchSpec ArchSpace::mutate_expand(const ArchSpec& arch, Rng& rng) const {
  check(arch);
  ArchSpec out = arch;
  const auto& stages = graph_.stages();
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::size_t wi = grid_.index_of(arch.widths[s]);
    out.widths[s] = grid_.values()[wi + rng.uniform_index(grid_.size() - wi)];
    out.depths[s] = static_cast<int>(
        rng.uniform_int(arch.depths[s], static_cast<long long>(stages[s].size())));
  }
  return out;
}

bool ArchSpace::contains(const ArchSpec& big, const ArchSpec& small) const {
  const StructMask mb = mask(big), ms = mask(small);
  for (int id : graph_.prunable_layers()) {
    const LayerMask& s = ms.at(id);
    if (!s.kept) continue;
    const LayerMask& b = mb.at(id);
    if (!b.kept || b.out_channels < s.out_channels) return false;
  }
  return true;
}

StructMask arch_to_mask(const ArchSpec& arch, const CompGraph& graph) {
  const auto& stages = graph.stages();
  if (arch.depths.size() != stages.size() || arch.widths.size() != stages.size()) {
    throw ArchError("arch " + format_arch(arch) + " does not match the graph's " +
                    std::to_string(stages.size()) + " stages");
  }
  StructMask m = StructMask::full(graph);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const Stage& st = stages[s];
    if (arch.depths[s] < 1 || static_cast<std::size_t>(arch.depths[s]) > st.size()) {
      throw ArchError("arch " + format_arch(arch) + ": depth out of range in stage " +
                      std::to_string(s));
    }
    if (!(arch.widths[s] > 0.0) || arch.widths[s] > 1.0) {
      throw ArchError("arch " + format_arch(arch) + ": width outside (0, 1]");
    }
    for (std::size_t b = 0; b < st.size(); ++b) {
      for (int id : st.blocks[b]) {
        LayerMask& lm = m.at(id);
        if (b >= static_cast<std::size_t>(arch.depths[s])) {
          lm.kept = false;
          continue;
        }
        if (graph.groups()[graph.group_of(id)].pinned) continue;
        lm.out_channels = kept_channels(arch.widths[s], graph.node(id).attrs.out);
      }
    }
  }
  return m;
}

double flops_ratio(const CompGraph& graph, const ArchSpec& arch, const Shape& input_shape) {
  Shape b = {1};
  b.insert(b.end(), input_shape.begin(), input_shape.end());
  const StructMask m = arch_to_mask(arch, graph);
  return static_cast<double>(estimate_cost(graph, b, &m).flops) /
         static_cast<double>(estimate_cost(graph, b).flops);
}

double params_ratio(const CompGraph& graph, const ArchSpec& arch, const Shape& input_shape) {
  Shape b = {1};
  b.insert(b.end(), input_shape.begin(), input_shape.end());
  const StructMask m = arch_to_mask(arch, graph);
  return static_cast<double>(estimate_cost(graph, b, &m).params) /
         static_cast<double>(estimate_cost(graph, b).params);
}

}  // namespace stp
