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

#include "stp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace stp {

namespace {

constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > s_.size()) throw std::runtime_error("weights: truncated file");
    char buf[sizeof(T)];
    std::memcpy(buf, s_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::string take(std::size_t n) {
    if (pos_ + n > s_.size()) throw std::runtime_error("weights: truncated file");
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_params(const ParamStore& params) {
  std::string out = "STPW";
  put<std::uint32_t>(out, kVersion);
  const auto ts = params.tensors();
  put<std::uint64_t>(out, ts.size());
  for (const Tensor* t : ts) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put<std::uint64_t>(out, d);
    for (double v : t->values()) put<double>(out, v);
  }
  return out;
}

ParamStore decode_params(const std::string& bytes, const CompGraph& graph) {
  Reader r(bytes);
  if (r.take(4) != "STPW") throw std::runtime_error("weights: bad magic");
  if (r.get<std::uint32_t>() != kVersion) throw std::runtime_error("weights: unsupported version");
  ParamStore ps(graph);
  auto ts = ps.tensors();
  if (r.get<std::uint64_t>() != ts.size()) throw std::runtime_error("weights: tensor count differs from the model");
  for (Tensor* t : ts) {
    const auto rank = r.get<std::uint32_t>();
    Shape s(rank);
    for (auto& d : s) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (s != t->shape()) {
      throw std::runtime_error("weights: tensor shape " + shape_str(s) + " does not match " +
                               shape_str(t->shape()));
    }
    for (double& v : t->values()) v = r.get<double>();
  }
  if (!r.done()) throw std::runtime_error("weights: trailing bytes");
  return ps;
}

void write_params(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const std::string bytes = encode_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParamStore read_params(const std::string& path, const CompGraph& graph) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_params(ss.str(), graph);
}

std::string params_manifest(const CompGraph& graph, const ParamStore& params,
                            const std::string& weights_file, const std::string& model_file) {
  nlohmann::ordered_json j;
  j["format"] = "STPW";
  j["version"] = kVersion;
  j["endianness"] = "little";
  j["weights"] = weights_file;
  j["model"] = model_file;
  auto arr = nlohmann::ordered_json::array();
  std::size_t offset = 4 + 4 + 8;
  for (int id : graph.layers()) {
    const LayerParams& l = params.at(id);
    for (const auto& [name, t] : {std::pair<const char*, const Tensor*>{"weight", &l.weight},
                                  {"bias", &l.bias}}) {
      if (t->empty()) continue;
      offset += 4 + 8 * t->rank();
      arr.push_back({{"node", id}, {"name", name}, {"shape", t->shape()}, {"offset", offset}});
      offset += 8 * t->numel();
    }
  }
  j["tensors"] = std::move(arr);
  j["bytes"] = offset;
  return j.dump(2);
}

}  // namespace stp
