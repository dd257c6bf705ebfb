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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "relmat/numerics/tensor.hpp"

namespace relmat {

struct GradCheckResult {
  double max_relative_error = 0.0;
  // False when two evaluations at the same point disagree (e.g. an unfrozen
  // dropout mask); the error figure is then meaningless.
  bool deterministic = true;
  std::size_t checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;

  bool reliable() const { return deterministic; }
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares analytic gradients of `f` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) for every element of every input.
/// Relative error uses the denominator max(|analytic|, |numeric|, floor).
/// Raise `floor` above the round-off noise of the differences, roughly
/// |f| * 1e-16 / eps, or tiny gradients dominate the figure.
inline GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor> inputs,
                                  double eps = 1e-6, double floor = 1e-8) {
  if (eps < 1e-7 || eps > 1e-3) throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");
  if (!(floor > 0.0)) throw ConfigError("grad_check: floor must be positive");
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor out = f(inputs);
  if (out.numel() != 1) {
    throw ShapeError("grad_check: function output must be scalar, got " + shape_str(out.shape()));
  }
  out.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    analytic.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                       : std::vector<double>(t.numel(), 0.0));
  }

  GradCheckResult res;
  res.deterministic = f(inputs).item() == out.item();

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto x = inputs[k].mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double fp = f(inputs).item();
      x[i] = orig - eps;
      const double fm = f(inputs).item();
      x[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_relative_error) {
        res.max_relative_error = rel;
        res.worst_input = k;
        res.worst_index = i;
      }
      ++res.checked;
    }
  }
  for (auto& t : inputs) t.zero_grad();
  return res;
}

}  // namespace relmat
