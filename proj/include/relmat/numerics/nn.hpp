// Copyright 2026 The relmat Authors.
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

#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "relmat/numerics/ops.hpp"
#include "relmat/numerics/tensor.hpp"

namespace relmat {

/// Train/eval switch plus the RNG that drives dropout masks.
struct RunContext {
  bool train = false;
  std::mt19937_64* rng = nullptr;

  static RunContext eval() { return {}; }
};

/// Named trainable tensors, iterated in name order.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Tensor t) {
    if (params_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    t.set_requires_grad(true);
    return params_[name] = std::move(t);
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  const Tensor& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
    return it->second;
  }

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

  /// Deep copy with independent value buffers.
  ParamStore clone() const {
    ParamStore out;
    for (const auto& [name, t] : params_) out.add(name, t.clone());
    return out;
  }

 private:
  Map params_;
};

/// Glorot/Xavier uniform for a (fan_in x fan_out) weight.
inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = dist(rng);
  return Tensor({fan_in, fan_out}, std::move(v), true);
}

inline Tensor normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

/// x (N x in) * w (in x out) + b (out).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

// Registers "<prefix>.weight" / "<prefix>.bias".
inline void add_linear(ParamStore& ps, const std::string& prefix, std::size_t in,
                       std::size_t out, std::mt19937_64& rng) {
  ps.add(prefix + ".weight", xavier_uniform(in, out, rng));
  ps.add(prefix + ".bias", Tensor::zeros({out}, true));
}

inline Tensor apply_linear(const ParamStore& ps, const std::string& prefix, const Tensor& x) {
  return linear(x, ps.at(prefix + ".weight"), ps.at(prefix + ".bias"));
}

inline void add_layer_norm(ParamStore& ps, const std::string& prefix, std::size_t d) {
  ps.add(prefix + ".gamma", Tensor::full({d}, 1.0, true));
  ps.add(prefix + ".beta", Tensor::zeros({d}, true));
}

inline Tensor apply_layer_norm(const ParamStore& ps, const std::string& prefix,
                               const Tensor& x) {
  return layer_norm(x, ps.at(prefix + ".gamma"), ps.at(prefix + ".beta"));
}

}  // namespace relmat
