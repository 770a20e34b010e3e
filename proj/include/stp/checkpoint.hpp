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

// Weight files. Layout, all little-endian:
//   "STPW" | u32 version (1) | u64 tensor count
//   per tensor, in ParamStore::tensors() order:
//     u32 rank | rank x u64 dims | numel x f64 values

#ifndef STP_CHECKPOINT_HPP_
#define STP_CHECKPOINT_HPP_

#include <string>

#include "stp/interpreter.hpp"

namespace stp {

std::string encode_params(const ParamStore& params);
// Fills a store laid out for `graph`; throws on any layout mismatch.
ParamStore decode_params(const std::string& bytes, const CompGraph& graph);

void write_params(const std::string& path, const ParamStore& params);
ParamStore read_params(const std::string& path, const CompGraph& graph);

// JSON manifest naming the weight and model files and listing every tensor
// with its node id, role, shape and byte offset.
std::string params_manifest(const CompGraph& graph, const ParamStore& params,
                            const std::string& weights_file, const std::string& model_file);

}  // namespace stp

#endif  // STP_CHECKPOINT_HPP_
