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
#include <random>
#include <string>
#include <vector>

#include "relmat/error.hpp"
#include "relmat/numerics/nn.hpp"

namespace relmat {

struct MatrixTransformerConfig {
  std::size_t dim = 512;
  std::size_t heads = 8;
  std::size_t layers = 4;
  std::size_t ffn_hidden = 4096;
  std::size_t max_m = 32;
  double dropout = 0.1;
};

inline void validate_mt_config(const MatrixTransformerConfig& cfg) {
  if (cfg.dim == 0 || cfg.heads == 0 || cfg.dim % cfg.heads != 0) {
    throw ConfigError("matrix transformer: dim must be a positive multiple of heads");
  }
  if (cfg.ffn_hidden == 0 || cfg.max_m == 0) {
    throw ConfigError("matrix transformer: ffn_hidden and max_m must be positive");
  }
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ConfigError("matrix transformer: dropout outside [0,1)");
  }
}

inline std::string mt_prefix(std::size_t layer) { return "mt.layer" + std::to_string(layer); }

inline void init_mt_params(ParamStore& ps, const MatrixTransformerConfig& cfg,
                           std::mt19937_64& rng) {
  validate_mt_config(cfg);
  const std::size_t d = cfg.dim;
  ps.add("mt.row", normal_init({cfg.max_m, d}, 0.02, rng));
  ps.add("mt.col", normal_init({cfg.max_m, d}, 0.02, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto p = mt_prefix(l);
    add_layer_norm(ps, p + ".ln1", d);
    add_linear(ps, p + ".attn.wq", d, d, rng);
    add_linear(ps, p + ".attn.wk", d, d, rng);
    add_linear(ps, p + ".attn.wv", d, d, rng);
    add_linear(ps, p + ".attn.wo", d, d, rng);
    add_layer_norm(ps, p + ".ln2", d);
    add_linear(ps, p + ".ffn1", d, cfg.ffn_hidden, rng);
    add_linear(ps, p + ".ffn2", cfg.ffn_hidden, d, rng);
  }
  add_layer_norm(ps, "mt.final_ln", d);
}

/// out[i][j] = rels[i][j] + row[i] + col[j].
inline Tensor add_position(const Tensor& rels, const ParamStore& ps) {
  if (rels.dim() != 3 || rels.size(0) != rels.size(1)) {
    throw ShapeError("add_position expects M x M x d, got " + shape_str(rels.shape()));
  }
  const std::size_t m = rels.size(0), d = rels.size(2);
  const Tensor& row = ps.at("mt.row");
  const Tensor& col = ps.at("mt.col");
  if (m > row.size(0)) {
    throw ShapeError("document has " + std::to_string(m) + " entities; the matrix transformer " +
                     "supports at most " + std::to_string(row.size(0)));
  }
  if (row.size(1) != d) throw ShapeError("position tables do not match relation width");
  Tensor r = reshape(slice(row, 0, 0, m), {m, 1, d});
  Tensor c = reshape(slice(col, 0, 0, m), {1, m, d});
  return add(add(rels, r), c);
}

/// Full (unmasked) multi-head self-attention over the rows of x (S x d).
/// When `probs` is given the per-head attention matrices (H x S x S) are
/// appended to it.
inline Tensor self_attention(const Tensor& x, const ParamStore& ps, const std::string& p,
                             std::size_t heads, double drop, const RunContext& ctx,
                             std::vector<Tensor>* probs = nullptr) {
  const std::size_t s = x.size(0), d = x.size(1), dh = d / heads;
  auto split = [&](const Tensor& t) { return permute(reshape(t, {s, heads, dh}), {1, 0, 2}); };
  Tensor q = split(apply_linear(ps, p + ".wq", x));
  Tensor kt = permute(reshape(apply_linear(ps, p + ".wk", x), {s, heads, dh}), {1, 2, 0});
  Tensor v = split(apply_linear(ps, p + ".wv", x));
  Tensor att = softmax(scale(matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(dh))), 2);
  if (probs) probs->push_back(att);
  att = dropout(att, drop, ctx.train, ctx.rng);
  Tensor ctx_v = reshape(permute(matmul(att, v), {1, 0, 2}), {s, d});
  return apply_linear(ps, p + ".wo", ctx_v);
}

/// Pre-norm encoder over the M^2 cells in row-major order, returning M x M x d.
inline Tensor run_multiror(const Tensor& rels, const ParamStore& ps,
                           const MatrixTransformerConfig& cfg, const RunContext& ctx = {},
                           std::size_t layers = static_cast<std::size_t>(-1),
                           std::vector<Tensor>* probs = nullptr) {
  const std::size_t m = rels.size(0), d = cfg.dim;
  if (rels.shape() != Shape{m, m, d}) {
    throw ShapeError("run_multiror: relations " + shape_str(rels.shape()) + " for d=" +
                     std::to_string(d));
  }
  Tensor x = reshape(add_position(rels, ps), {m * m, d});
  const std::size_t n_layers = std::min(layers, cfg.layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto p = mt_prefix(l);
    Tensor a = self_attention(apply_layer_norm(ps, p + ".ln1", x), ps, p + ".attn", cfg.heads,
                              cfg.dropout, ctx, probs);
    x = add(x, dropout(a, cfg.dropout, ctx.train, ctx.rng));
    Tensor f = apply_linear(ps, p + ".ffn2",
                            relu(apply_linear(ps, p + ".ffn1", apply_layer_norm(ps, p + ".ln2", x))));
    x = add(x, dropout(f, cfg.dropout, ctx.train, ctx.rng));
  }
  x = apply_layer_norm(ps, "mt.final_ln", x);
  return reshape(x, {m, m, d});
}

}  // namespace relmat
