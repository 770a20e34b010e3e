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

// Bundled model descriptions, emitted in the stpgraph text format.

#ifndef STP_MODELS_HPP_
#define STP_MODELS_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "stp/graph.hpp"

namespace stp {

// Bottleneck ResNet-50 on 3x32x32 input with an ImageNet-style stem
// (7x7/2 conv, 3x3/2 max-pool). Stem and classifier are fixed; each stage's
// width ratio applies to every conv in the stage, shortcut included.
std::string resnet50_cifar_spec(std::size_t num_classes = 100);

struct ToyResNetOptions {
  Shape input = {1, 8, 8};
  std::size_t stem_channels = 8;
  std::vector<std::size_t> stage_channels = {8, 8, 16, 16};
  std::vector<std::size_t> stage_blocks = {2, 2, 2, 2};
  // Stride of each stage's first block.
  std::vector<std::size_t> stage_strides = {1, 2, 1, 2};
  std::size_t num_classes = 10;
};

// Basic-block residual CNN without normalization. The first block of every
// stage has a 1x1 projection shortcut, so each stage's residual group is
// prunable.
std::string toy_resnet_spec(const ToyResNetOptions& opts = {});

// input -> linear(hidden, prunable) -> relu -> linear(classes, fixed).
std::string mlp_spec(std::size_t in = 16, std::size_t hidden = 32, std::size_t classes = 10);

// Names accepted by load_model: "resnet50_cifar", "toy_resnet", "mlp".
std::vector<std::string> builtin_model_names();
// A builtin name or a path to an stpgraph file.
CompGraph load_model(std::string_view name_or_path);

}  // namespace stp

#endif  // STP_MODELS_HPP_
