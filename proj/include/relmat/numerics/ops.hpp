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
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "relmat/numerics/tensor.hpp"

namespace relmat {

namespace detail {

inline void check_axis(const Tensor& t, std::size_t axis, const char* op) {
  if (axis >= t.dim()) {
    throw ShapeError(std::string(op) + ": invalid axis " + std::to_string(axis) +
                     " for shape " + shape_str(t.shape()));
  }
}

// outer x len x inner decomposition around one axis
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

// Numpy-style broadcast of two shapes. Index maps are only materialized for
// the general case; same-shape and trailing-suffix cases use arithmetic.
struct Broadcast {
  enum class Kind { same, b_suffix, a_suffix, general } kind = Kind::general;
  Shape out;
  std::vector<std::uint32_t> ia, ib;
  std::size_t na = 0, nb = 0;

  std::size_t a_index(std::size_t i) const {
    switch (kind) {
      case Kind::same: return i;
      case Kind::b_suffix: return i;
      case Kind::a_suffix: return i % na;
      default: return ia[i];
    }
  }
  std::size_t b_index(std::size_t i) const {
    switch (kind) {
      case Kind::same: return i;
      case Kind::b_suffix: return i % nb;
      case Kind::a_suffix: return i;
      default: return ib[i];
    }
  }
};

inline bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

inline Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  bc.na = shape_numel(a);
  bc.nb = shape_numel(b);
  if (a == b) {
    bc.kind = Broadcast::Kind::same;
    bc.out = a;
    return bc;
  }
  if (is_suffix(b, a)) {
    bc.kind = Broadcast::Kind::b_suffix;
    bc.out = a;
    return bc;
  }
  if (is_suffix(a, b)) {
    bc.kind = Broadcast::Kind::a_suffix;
    bc.out = b;
    return bc;
  }
  const std::size_t nd = std::max(a.size(), b.size());
  Shape pa(nd, 1), pb(nd, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<long>(nd - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<long>(nd - b.size()));
  bc.out.resize(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
    }
    bc.out[d] = std::max(pa[d], pb[d]);
  }
  std::vector<std::size_t> sa(nd), sb(nd);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t d = nd; d-- > 0;) {
    sa[d] = pa[d] == 1 ? 0 : stride_a;
    sb[d] = pb[d] == 1 ? 0 : stride_b;
    stride_a *= pa[d];
    stride_b *= pb[d];
  }
  const std::size_t n = shape_numel(bc.out);
  bc.ia.resize(n);
  bc.ib.resize(n);
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < nd; ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    bc.ia[i] = static_cast<std::uint32_t>(oa);
    bc.ib[i] = static_cast<std::uint32_t>(ob);
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < bc.out[d]) break;
      idx[d] = 0;
    }
  }
  return bc;
}

// C (n x m) += A (n x k) * B (k x m)
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
                    std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C (n x m) += A (n x k) * B^T, B stored (m x k)
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t n,
                    std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * m + j] += s;
    }
  }
}

// C (n x m) += A^T * B, A stored (k x n), B stored (k x m)
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t n,
                    std::size_t k, std::size_t m) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * n;
    const double* bp = b + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  auto bc = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape(), name));
  const std::size_t n = shape_numel(bc->out);
  std::vector<double> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[bc->a_index(i)], bv[bc->b_index(i)]);
  return Tensor::make_result(bc->out, std::move(out), {a, b}, [bc, da, db](Node& self) {
    const auto& x = input_value(self, 0);
    const auto& y = input_value(self, 1);
    double* gx = input_grad(self, 0);
    double* gy = input_grad(self, 1);
    const auto& g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t ia = bc->a_index(i), ib = bc->b_index(i);
      if (gx) gx[ia] += da(x[ia], y[ib], g[i]);
      if (gy) gy[ib] += db(x[ia], y[ib], g[i]);
    }
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.values());
  for (auto& v : out) v *= c;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [c](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += c * self.grad[i];
  });
}

inline Tensor square(const Tensor& a) { return mul(a, a); }

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    const auto& x = detail::input_value(self, 0);
    double* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x[i] > 0.0) ga[i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// (n x k)(k x m), or batched (B x n x k)(B x k x m).
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.dim() == 3 && b.dim() == 3;
  if (!batched && !(a.dim() == 2 && b.dim() == 2)) {
    throw ShapeError("matmul: unsupported shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t batch = batched ? a.size(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t n = a.size(off), k = a.size(off + 1), m = b.size(off + 1);
  if (b.size(off) != k || (batched && b.size(0) != batch)) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(batch * n * m, 0.0);
  for (std::size_t t = 0; t < batch; ++t) {
    detail::gemm_nn(a.values().data() + t * n * k, b.values().data() + t * k * m,
                    out.data() + t * n * m, n, k, m);
  }
  Shape shape = batched ? Shape{batch, n, m} : Shape{n, m};
  return Tensor::make_result(shape, std::move(out), {a, b},
                             [batch, n, k, m](detail::Node& self) {
    const auto& av = detail::input_value(self, 0);
    const auto& bv = detail::input_value(self, 1);
    double* ga = detail::input_grad(self, 0);
    double* gb = detail::input_grad(self, 1);
    for (std::size_t t = 0; t < batch; ++t) {
      const double* g = self.grad.data() + t * n * m;
      if (ga) detail::gemm_nt(g, bv.data() + t * k * m, ga + t * n * k, n, m, k);
      if (gb) detail::gemm_tn(av.data() + t * n * k, g, gb + t * k * m, k, n, m);
    }
  });
}

/// General axis permutation: out.shape[d] = a.shape[perm[d]].
inline Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  const std::size_t nd = a.dim();
  if (perm.size() != nd) throw ShapeError("permute: permutation rank mismatch");
  std::vector<bool> used(nd, false);
  for (auto p : perm) {
    if (p >= nd || used[p]) throw ShapeError("permute: invalid permutation");
    used[p] = true;
  }
  Shape out_shape(nd);
  for (std::size_t d = 0; d < nd; ++d) out_shape[d] = a.size(perm[d]);
  std::vector<std::size_t> in_stride(nd);
  std::size_t s = 1;
  for (std::size_t d = nd; d-- > 0;) {
    in_stride[d] = s;
    s *= a.size(d);
  }
  const std::size_t n = a.numel();
  auto src = std::make_shared<std::vector<std::uint32_t>>(n);
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t o = 0;
    for (std::size_t d = 0; d < nd; ++d) o += idx[d] * in_stride[perm[d]];
    (*src)[i] = static_cast<std::uint32_t>(o);
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values()[(*src)[i]];
  return Tensor::make_result(out_shape, std::move(out), {a}, [src](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[(*src)[i]] += self.grad[i];
  });
}

inline Tensor transpose(const Tensor& a) {
  if (a.dim() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(a.shape()));
  return permute(a, {1, 0});
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return Tensor::make_result(std::move(shape), a.values(), {a}, [](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  detail::check_axis(parts[0], axis, "concat");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.dim() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < s0.size(); ++d) {
      if (d != axis && p.size(d) != s0[d]) {
        throw ShapeError("concat: shape mismatch " + shape_str(s0) + " vs " +
                         shape_str(p.shape()));
      }
    }
    out_shape[axis] += p.size(axis);
  }
  const auto split = detail::split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.size(axis);
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(p.values().data() + o * len * split.inner, len * split.inner,
                  out.data() + (o * split.len + off) * split.inner);
    }
    off += len;
  }
  return Tensor::make_result(out_shape, std::move(out), parts,
                             [split, offsets](detail::Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      double* g = detail::input_grad(self, k);
      if (!g) continue;
      const std::size_t len = self.inputs[k]->value.size() / (split.outer * split.inner);
      for (std::size_t o = 0; o < split.outer; ++o) {
        const double* src = self.grad.data() + (o * split.len + offsets[k]) * split.inner;
        double* dst = g + o * len * split.inner;
        for (std::size_t i = 0; i < len * split.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

/// Elements [start, end) along `axis`.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t end) {
  detail::check_axis(a, axis, "slice");
  if (start > end || end > a.size(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                     ") out of bounds for " + shape_str(a.shape()));
  }
  const auto split = detail::split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - start;
  const std::size_t len = end - start;
  std::vector<double> out(split.outer * len * split.inner);
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(a.values().data() + (o * split.len + start) * split.inner, len * split.inner,
                out.data() + o * len * split.inner);
  }
  return Tensor::make_result(out_shape, std::move(out), {a},
                             [split, start, len](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t o = 0; o < split.outer; ++o) {
      const double* src = self.grad.data() + o * len * split.inner;
      double* dst = ga + (o * split.len + start) * split.inner;
      for (std::size_t i = 0; i < len * split.inner; ++i) dst[i] += src[i];
    }
  });
}

/// Rows of `table` (first axis) selected by `indices`; the embedding lookup.
inline Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices) {
  if (table.dim() < 1) throw ShapeError("gather_rows: scalar table");
  const std::size_t rows = table.size(0);
  const std::size_t width = rows == 0 ? 0 : table.numel() / rows;
  Shape out_shape = table.shape();
  out_shape[0] = indices.size();
  std::vector<double> out(indices.size() * width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[r]) + " >= " +
                       std::to_string(rows));
    }
    std::copy_n(table.values().data() + indices[r] * width, width, out.data() + r * width);
  }
  return Tensor::make_result(out_shape, std::move(out), {table},
                             [indices, width](detail::Node& self) {
    double* gt = detail::input_grad(self, 0);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      const double* src = self.grad.data() + r * width;
      double* dst = gt + indices[r] * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

inline Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
  return gather_rows(table, ids);
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false) {
  detail::check_axis(a, axis, "sum");
  const auto sp = detail::split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<long>(axis));
  }
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  const auto& x = a.values();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.len; ++l) {
      const double* src = x.data() + (o * sp.len + l) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  return Tensor::make_result(out_shape, std::move(out), {a}, [sp](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* g = self.grad.data() + o * sp.inner;
      for (std::size_t l = 0; l < sp.len; ++l) {
        double* dst = ga + (o * sp.len + l) * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

inline Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false) {
  detail::check_axis(a, axis, "mean");
  const std::size_t len = a.size(axis);
  if (len == 0) throw ShapeError("mean: empty axis");
  return scale(sum(a, axis, keepdim), 1.0 / static_cast<double>(len));
}

inline Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor::make_result({}, {s}, {a}, [](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    const double g = self.grad[0];
    const std::size_t n = self.inputs[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g;
  });
}

inline Tensor mean_all(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

// ---------------------------------------------------------------------------
// Normalization and probability

inline Tensor softmax(const Tensor& a, std::size_t axis) {
  detail::check_axis(a, axis, "softmax");
  const auto sp = detail::split_axis(a.shape(), axis);
  std::vector<double> out(a.numel());
  const auto& x = a.values();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < sp.len; ++l) mx = std::max(mx, x[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double e = std::exp(x[base + l * sp.inner] - mx);
        out[base + l * sp.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] /= z;
    }
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(a.shape(), std::move(out), {a}, [sp, y](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) {
          dot += g[base + l * sp.inner] * (*y)[base + l * sp.inner];
        }
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t k = base + l * sp.inner;
          ga[k] += (*y)[k] * (g[k] - dot);
        }
      }
    }
  });
}

/// Layer normalization over the last axis with affine gamma/beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  if (x.dim() < 1) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: gamma/beta size mismatch with " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel());
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (row[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gamma[i] + beta[i];
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [rows, d, xhat, inv_std](detail::Node& self) {
    const auto& gv = detail::input_value(self, 1);
    double* gx = detail::input_grad(self, 0);
    double* gg = detail::input_grad(self, 1);
    double* gb = detail::input_grad(self, 2);
    const auto& g = self.grad;
    std::vector<double> dh(d);
    for (std::size_t r = 0; r < rows; ++r) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t k = r * d + i;
        if (gg) gg[i] += g[k] * (*xhat)[k];
        if (gb) gb[i] += g[k];
        dh[i] = g[k] * gv[i];
        s1 += dh[i];
        s2 += dh[i] * (*xhat)[k];
      }
      if (!gx) continue;
      const double is = (*inv_std)[r];
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t k = r * d + i;
        gx[k] += is * (dh[i] - inv_d * s1 - (*xhat)[k] * inv_d * s2);
      }
    }
  });
}

/// Inverted dropout. In eval mode (or p == 0) this is the identity. The mask
/// is drawn from `rng`, so a reseeded generator reproduces it exactly.
inline Tensor dropout(const Tensor& a, double p, bool train, std::mt19937_64* rng) {
  if (!train || p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout: p must be < 1");
  if (!rng) throw ConfigError("dropout: training mode needs an RNG");
  auto mask = std::make_shared<std::vector<double>>(a.numel());
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (auto& m : *mask) m = keep(*rng) ? s : 0.0;
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * (*mask)[i];
  return Tensor::make_result(a.shape(), std::move(out), {a}, [mask](detail::Node& self) {
    double* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// Segment (graph) ops

/// Softmax of `scores` (E x H) within groups of rows sharing a segment id.
inline Tensor segment_softmax(const Tensor& scores, const std::vector<std::size_t>& segment,
                              std::size_t num_segments) {
  if (scores.dim() != 2 || scores.size(0) != segment.size()) {
    throw ShapeError("segment_softmax: scores " + shape_str(scores.shape()) + " vs " +
                     std::to_string(segment.size()) + " segment ids");
  }
  const std::size_t e = scores.size(0), h = scores.size(1);
  const auto& x = scores.values();
  std::vector<double> mx(num_segments * h, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < e; ++r) {
    if (segment[r] >= num_segments) throw ShapeError("segment_softmax: segment id out of range");
    for (std::size_t k = 0; k < h; ++k) {
      mx[segment[r] * h + k] = std::max(mx[segment[r] * h + k], x[r * h + k]);
    }
  }
  std::vector<double> out(e * h), z(num_segments * h, 0.0);
  for (std::size_t r = 0; r < e; ++r) {
    for (std::size_t k = 0; k < h; ++k) {
      const double v = std::exp(x[r * h + k] - mx[segment[r] * h + k]);
      out[r * h + k] = v;
      z[segment[r] * h + k] += v;
    }
  }
  for (std::size_t r = 0; r < e; ++r) {
    for (std::size_t k = 0; k < h; ++k) out[r * h + k] /= z[segment[r] * h + k];
  }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_result(scores.shape(), std::move(out), {scores},
                             [y, segment, num_segments, e, h](detail::Node& self) {
    double* gs = detail::input_grad(self, 0);
    const auto& g = self.grad;
    std::vector<double> dot(num_segments * h, 0.0);
    for (std::size_t r = 0; r < e; ++r) {
      for (std::size_t k = 0; k < h; ++k) dot[segment[r] * h + k] += g[r * h + k] * (*y)[r * h + k];
    }
    for (std::size_t r = 0; r < e; ++r) {
      for (std::size_t k = 0; k < h; ++k) {
        const std::size_t i = r * h + k;
        gs[i] += (*y)[i] * (g[i] - dot[segment[r] * h + k]);
      }
    }
  });
}

/// Sums rows of `x` into `num_segments` output rows.
inline Tensor segment_sum(const Tensor& x, const std::vector<std::size_t>& segment,
                          std::size_t num_segments) {
  if (x.dim() < 1 || x.size(0) != segment.size()) {
    throw ShapeError("segment_sum: rows " + shape_str(x.shape()) + " vs " +
                     std::to_string(segment.size()) + " segment ids");
  }
  const std::size_t width = x.size(0) == 0 ? 0 : x.numel() / x.size(0);
  Shape out_shape = x.shape();
  out_shape[0] = num_segments;
  std::vector<double> out(num_segments * width, 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    if (segment[r] >= num_segments) throw ShapeError("segment_sum: segment id out of range");
    const double* src = x.values().data() + r * width;
    double* dst = out.data() + segment[r] * width;
    for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
  }
  return Tensor::make_result(out_shape, std::move(out), {x},
                             [segment, width](detail::Node& self) {
    double* gx = detail::input_grad(self, 0);
    for (std::size_t r = 0; r < segment.size(); ++r) {
      const double* src = self.grad.data() + segment[r] * width;
      double* dst = gx + r * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Loss

enum class Reduction { mean, sum };

/// Softmax cross-entropy of `logits` (N x C) against integer labels. Rows
/// labelled `ignore_label` contribute nothing; the mean is over the rest.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            int ignore_label = -1, Reduction reduction = Reduction::mean) {
  if (logits.dim() != 2 || logits.size(0) != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.size(0), c = logits.size(1);
  const auto& x = logits.values();
  auto probs = std::make_shared<std::vector<double>>(n * c);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y == ignore_label) continue;
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ShapeError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                       std::to_string(c) + ")");
    }
    const double* row = x.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < c; ++k) (*probs)[r * c + k] = std::exp(row[k] - log_z);
    total += log_z - row[y];
    ++counted;
  }
  const double norm =
      reduction == Reduction::mean && counted > 0 ? 1.0 / static_cast<double>(counted) : 1.0;
  return Tensor::make_result({}, {total * norm}, {logits},
                             [probs, labels, ignore_label, n, c, norm](detail::Node& self) {
    double* gl = detail::input_grad(self, 0);
    const double g = self.grad[0] * norm;
    for (std::size_t r = 0; r < n; ++r) {
      if (labels[r] == ignore_label) continue;
      for (std::size_t k = 0; k < c; ++k) {
        double d = (*probs)[r * c + k];
        if (static_cast<int>(k) == labels[r]) d -= 1.0;
        gl[r * c + k] += g * d;
      }
    }
  });
}

}  // namespace relmat
