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

#include "stp/models.hpp"

#include <sstream>
#include <stdexcept>

namespace stp {

namespace {

// Appends nodes with sequential ids.
class SpecWriter {
 public:
  SpecWriter() { os_ << "stpgraph v1\n"; }

  int input(const Shape& shape) {
    os_ << next_ << " input shape=";
    for (std::size_t k = 0; k < shape.size(); ++k) os_ << (k ? "x" : "") << shape[k];
    os_ << '\n';
    return next_++;
  }
  int conv(int from, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
           std::size_t pad, int stage = -1, int block = -1) {
    os_ << next_ << " conv2d from=" << from << " in=" << in << " out=" << out << " k=" << k
        << " stride=" << stride << " pad=" << pad << " bias=0";
    tag(stage, block);
    return next_++;
  }
  int linear(int from, std::size_t in, std::size_t out, int stage = -1, int block = -1) {
    os_ << next_ << " linear from=" << from << " in=" << in << " out=" << out << " bias=1";
    tag(stage, block);
    return next_++;
  }
  int max_pool(int from, std::size_t k, std::size_t stride, std::size_t pad) {
    os_ << next_ << " max_pool from=" << from << " k=" << k << " stride=" << stride
        << " pad=" << pad << '\n';
    return next_++;
  }
  int add(int a, int b) {
    os_ << next_ << " add from=" << a << ',' << b << '\n';
    return next_++;
  }
  int unary(std::string_view kind, int from) {
    os_ << next_ << ' ' << kind << " from=" << from << '\n';
    return next_++;
  }
  std::string str() const { return os_.str(); }

 private:
  void tag(int stage, int block) {
    if (stage >= 0) os_ << " stage=" << stage << " block=" << block;
    os_ << '\n';
  }

  std::ostringstream os_;
  int next_ = 0;
};

}  // namespace

std::string resnet50_cifar_spec(std::size_t num_classes) {
  const std::size_t planes[] = {64, 128, 256, 512};
  const int blocks[] = {3, 4, 6, 3};
  const std::size_t strides[] = {1, 2, 2, 2};
  SpecWriter w;
  int x = w.input({3, 32, 32});
  x = w.unary("relu", w.conv(x, 3, 64, 7, 2, 3));
  x = w.max_pool(x, 3, 2, 1);
  std::size_t in = 64;
  for (int s = 0; s < 4; ++s) {
    const std::size_t p = planes[s];
    for (int b = 0; b < blocks[s]; ++b) {
      const std::size_t stride = b == 0 ? strides[s] : 1;
      int y = w.unary("relu", w.conv(x, in, p, 1, 1, 0, s, b));
      y = w.unary("relu", w.conv(y, p, p, 3, stride, 1, s, b));
      y = w.conv(y, p, 4 * p, 1, 1, 0, s, b);
      const int shortcut = b == 0 ? w.conv(x, in, 4 * p, 1, stride, 0, s, b) : x;
      x = w.unary("relu", w.add(y, shortcut));
      in = 4 * p;
    }
  }
  x = w.unary("global_pool", x);
  x = w.linear(x, in, num_classes);
  w.unary("output", x);
  return w.str();
}

std::string toy_resnet_spec(const ToyResNetOptions& opts) {
  if (opts.input.size() != 3 || opts.stage_channels.size() != opts.stage_blocks.size() ||
      opts.stage_channels.size() != opts.stage_strides.size() || opts.stage_channels.empty()) {
    throw std::invalid_argument("toy_resnet_spec: bad options");
  }
  SpecWriter w;
  int x = w.input(opts.input);
  x = w.unary("relu", w.conv(x, opts.input[0], opts.stem_channels, 3, 1, 1));
  std::size_t in = opts.stem_channels;
  for (std::size_t s = 0; s < opts.stage_channels.size(); ++s) {
    const std::size_t c = opts.stage_channels[s];
    const int si = static_cast<int>(s);
    for (int b = 0; b < static_cast<int>(opts.stage_blocks[s]); ++b) {
      const std::size_t stride = b == 0 ? opts.stage_strides[s] : 1;
      int y = w.unary("relu", w.conv(x, in, c, 3, stride, 1, si, b));
      y = w.conv(y, c, c, 3, 1, 1, si, b);
      const int shortcut = b == 0 ? w.conv(x, in, c, 1, stride, 0, si, b) : x;
      x = w.unary("relu", w.add(y, shortcut));
      in = c;
    }
  }
  x = w.unary("global_pool", x);
  x = w.linear(x, in, opts.num_classes);
  w.unary("output", x);
  return w.str();
}

std::string mlp_spec(std::size_t in, std::size_t hidden, std::size_t classes) {
  SpecWriter w;
  int x = w.input({in});
  x = w.unary("relu", w.linear(x, in, hidden, 0, 0));
  x = w.linear(x, hidden, classes);
  w.unary("output", x);
  return w.str();
}

std::vector<std::string> builtin_model_names() { return {"resnet50_cifar", "toy_resnet", "mlp"}; }

CompGraph load_model(std::string_view name_or_path) {
  if (name_or_path == "resnet50_cifar") return parse_model_spec(resnet50_cifar_spec());
  if (name_or_path == "toy_resnet") return parse_model_spec(toy_resnet_spec());
  if (name_or_path == "mlp") return parse_model_spec(mlp_spec());
  return load_model_spec(std::string(name_or_path));
}

}  // namespace stp
