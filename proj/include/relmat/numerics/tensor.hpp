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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "relmat/error.hpp"

namespace relmat {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

inline std::uint64_t next_node_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// One recorded value. Non-leaf nodes keep their inputs and a closure that
// pushes this node's gradient into them; `seq` is the execution order.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major f64 array with reverse-mode gradients.
///
/// Copies share the underlying node; use clone() for a deep copy. Forward ops
/// never mutate their inputs, so a Tensor behaves as an immutable value
/// unless mutable_data() is used on a leaf (parameters, probes).
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (shape_numel(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<detail::Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
    node_->seq = detail::next_node_seq();
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t size(std::size_t axis) const {
    if (axis >= dim()) throw ShapeError("axis " + std::to_string(axis) + " out of range");
    return node_->shape[axis];
  }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }

  void zero_grad() { node_->grad.clear(); }

  /// Backpropagates from this scalar into every requires_grad ancestor.
  /// Nodes are visited once each, in reverse execution order.
  void backward() const {
    if (numel() != 1) {
      throw ShapeError("backward() needs a scalar output, got " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;
    std::vector<detail::Node*> order;
    std::unordered_set<const detail::Node*> seen;
    std::vector<detail::Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto* n = stack.back();
      stack.pop_back();
      order.push_back(n);
      for (const auto& in : n->inputs) {
        if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
      }
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });
    node_->ensure_grad()[0] += 1.0;
    for (auto* n : order) {
      if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
  }

  /// Value copy cut off from the graph.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }
  Tensor clone() const { return Tensor(shape(), node_->value, requires_grad()); }

  // Builds an op result; records inputs and the backward closure only when
  // some input requires grad.
  static Tensor make_result(Shape shape, std::vector<double> value,
                            std::initializer_list<Tensor> inputs,
                            std::function<void(detail::Node&)> backward_fn) {
    return make_result(std::move(shape), std::move(value), std::vector<Tensor>(inputs),
                       std::move(backward_fn));
  }

  static Tensor make_result(Shape shape, std::vector<double> value,
                            const std::vector<Tensor>& inputs,
                            std::function<void(detail::Node&)> backward_fn) {
    Tensor out(std::move(shape), std::move(value), false);
#ifndef NDEBUG
    const auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(out.node_->value)) {
      bool inputs_finite = true;
      for (const auto& t : inputs) inputs_finite = inputs_finite && finite(t.node_->value);
      if (inputs_finite) throw Error("non-finite value produced from finite inputs");
    }
#endif
    bool rg = false;
    for (const auto& t : inputs) rg = rg || t.requires_grad();
    if (rg) {
      out.node_->requires_grad = true;
      for (const auto& t : inputs) out.node_->inputs.push_back(t.node_);
      out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
  }

  detail::Node* node() const { return node_.get(); }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

// Gradient buffer of input k, or nullptr if that input needs none.
inline double* input_grad(Node& self, std::size_t k) {
  auto& in = *self.inputs[k];
  if (!in.requires_grad) return nullptr;
  return in.ensure_grad().data();
}

inline const std::vector<double>& input_value(const Node& self, std::size_t k) {
  return self.inputs[k]->value;
}

}  // namespace detail
}  // namespace relmat
