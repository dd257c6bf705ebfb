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
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "relmat/numerics/nn.hpp"

namespace relmat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style) decay.
  double weight_decay = 0.0;
};

struct AdamMoments {
  std::vector<double> m, v;
};

/// One bias-corrected Adam update of `param` in place. `step` is 1-based.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& st,
                      const AdamConfig& cfg, double lr, std::size_t step) {
  if (st.m.size() != param.size()) {
    st.m.assign(param.size(), 0.0);
    st.v.assign(param.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    param[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param[i]);
  }
}

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params, double lr) {
    ++step_;
    for (auto& [name, t] : params) {
      adam_step(t.mutable_data(), t.grad(), state_[name], cfg_, lr, step_);
    }
  }

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::map<std::string, AdamMoments> state_;
};

/// Linear warmup to `peak_lr` over warmup_frac * total_steps, then cosine
/// decay to 0 at total_steps. Steps past the end give 0.
inline double lr_at(std::size_t step, std::size_t total_steps, double warmup_frac,
                    double peak_lr) {
  if (warmup_frac < 0.0 || warmup_frac >= 1.0) {
    throw ConfigError("lr_at: warmup fraction must lie in [0, 1)");
  }
  if (total_steps == 0 || step > total_steps) return 0.0;
  const double warmup = warmup_frac * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s < warmup) return peak_lr * s / warmup;
  const double progress = (s - warmup) / (static_cast<double>(total_steps) - warmup);
  return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, t] : params) {
    for (double g : t.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [_, t] : params) {
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

}  // namespace relmat
