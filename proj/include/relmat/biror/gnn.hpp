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
#include <random>
#include <string>
#include <vector>

#include "relmat/biror/graph.hpp"
#include "relmat/error.hpp"
#include "relmat/numerics/nn.hpp"

namespace relmat {

struct GnnConfig {
  std::size_t dim = 512;
  std::size_t heads = 8;
  std::size_t layers = 4;
  std::size_t ffn_hidden = 1024;
  double dropout = 0.1;
  bool self_loops = false;  // let nodes attend to themselves
  bool swap_qk = false;     // W^Q on the center, W^K on the neighbour
};

inline void validate_gnn_config(const GnnConfig& cfg) {
  if (cfg.dim == 0 || cfg.heads == 0 || cfg.dim % cfg.heads != 0) {
    throw ConfigError("gnn: dim must be a positive multiple of heads");
  }
  if (cfg.ffn_hidden == 0) throw ConfigError("gnn: ffn_hidden must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) throw ConfigError("gnn: dropout outside [0,1)");
}

inline std::string gnn_prefix(std::size_t layer) {
  return "gnn.layer" + std::to_string(layer);
}

inline void init_gnn_params(ParamStore& ps, const GnnConfig& cfg, std::mt19937_64& rng) {
  validate_gnn_config(cfg);
  const std::size_t d = cfg.dim;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto p = gnn_prefix(l);
    ps.add(p + ".wq", xavier_uniform(d, d, rng));
    ps.add(p + ".wk", xavier_uniform(d, d, rng));
    ps.add(p + ".wo", xavier_uniform(d, d, rng));
    add_linear(ps, p + ".ffn1", d, cfg.ffn_hidden, rng);
    add_linear(ps, p + ".ffn2", cfg.ffn_hidden, d, rng);
  }
}

/// Directed message list: edge e carries h[src[e]] into node dst[e].
struct MessageEdges {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<double> has_input;  // per node: 1 if it receives any message
};

inline MessageEdges message_edges(const RelGraph& g, bool self_loops) {
  MessageEdges m;
  m.has_input.assign(g.num_nodes(), 0.0);
  for (std::size_t u = 0; u < g.num_nodes(); ++u) {
    if (self_loops) {
      m.src.push_back(u);
      m.dst.push_back(u);
    }
    for (std::size_t v : g.adjacency[u]) {
      m.src.push_back(v);
      m.dst.push_back(u);
    }
  }
  for (std::size_t u : m.dst) m.has_input[u] = 1.0;
  return m;
}

/// Per-edge, per-head weights (E x heads): softmax over each node's incoming
/// edges of (W^Q h_v) . (W^K h_u) restricted to the head's block.
inline Tensor gnn_attention(const Tensor& h, const MessageEdges& edges, const ParamStore& ps,
                            const GnnConfig& cfg, std::size_t layer) {
  const auto p = gnn_prefix(layer);
  const std::size_t n = h.size(0), d = cfg.dim, heads = cfg.heads;
  if (h.dim() != 2 || h.size(1) != d) {
    throw ShapeError("gnn: node states " + shape_str(h.shape()) + " do not have width " +
                     std::to_string(d));
  }
  const std::size_t e = edges.src.size();
  if (e == 0) return Tensor::zeros({0, heads});
  Tensor q = matmul(h, ps.at(p + ".wq"));
  Tensor k = matmul(h, ps.at(p + ".wk"));
  const auto& q_rows = cfg.swap_qk ? edges.dst : edges.src;
  const auto& k_rows = cfg.swap_qk ? edges.src : edges.dst;
  Tensor prod = mul(gather_rows(q, q_rows), gather_rows(k, k_rows));
  Tensor scores = sum(reshape(prod, {e, heads, d / heads}), 2);
  return segment_softmax(scores, edges.dst, n);
}

/// Attention of one center node over an explicit neighbour list.
inline Tensor gnn_attention(const Tensor& h_u, const std::vector<Tensor>& neighbors,
                            const ParamStore& ps, const GnnConfig& cfg, std::size_t layer) {
  if (neighbors.empty()) throw ShapeError("gnn_attention: empty neighbourhood");
  std::vector<Tensor> rows{reshape(h_u, {1, cfg.dim})};
  MessageEdges edges;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    rows.push_back(reshape(neighbors[i], {1, cfg.dim}));
    edges.src.push_back(i + 1);
    edges.dst.push_back(0);
  }
  return gnn_attention(concat(rows, 0), edges, ps, cfg, layer);
}

/// h_u <- FFN(W^O concat_heads(sum_v alpha_uv h_v)). Nodes without incoming
/// messages keep their state.
inline Tensor gnn_layer(const Tensor& h, const MessageEdges& edges, const ParamStore& ps,
                        const GnnConfig& cfg, std::size_t layer, const RunContext& ctx = {}) {
  const auto p = gnn_prefix(layer);
  const std::size_t n = h.size(0), d = cfg.dim, heads = cfg.heads;
  if (edges.has_input.size() != n) throw ShapeError("gnn: edge list built for another graph");
  const std::size_t e = edges.src.size();
  if (e == 0) return h;
  Tensor alpha = dropout(gnn_attention(h, edges, ps, cfg, layer), cfg.dropout, ctx.train, ctx.rng);
  Tensor msg = mul(reshape(gather_rows(h, edges.src), {e, heads, d / heads}),
                   reshape(alpha, {e, heads, 1}));
  Tensor agg = segment_sum(reshape(msg, {e, d}), edges.dst, n);
  Tensor out = matmul(agg, ps.at(p + ".wo"));
  out = apply_linear(ps, p + ".ffn2", relu(apply_linear(ps, p + ".ffn1", out)));
  out = dropout(out, cfg.dropout, ctx.train, ctx.rng);
  bool all = true;
  for (double f : edges.has_input) all = all && f == 1.0;
  if (all) return out;
  Tensor keep = Tensor({n, 1}, edges.has_input);
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 - edges.has_input[i];
  return add(mul(out, keep), mul(h, Tensor({n, 1}, std::move(inv))));
}

/// Node states after `layers` rounds, entity rows first.
inline Tensor run_gnn(const RelGraph& g, const Tensor& h0, const ParamStore& ps,
                      const GnnConfig& cfg, const RunContext& ctx = {},
                      std::size_t layers = static_cast<std::size_t>(-1)) {
  const auto edges = message_edges(g, cfg.self_loops);
  Tensor h = h0;
  const std::size_t n_layers = std::min(layers, cfg.layers);
  for (std::size_t l = 0; l < n_layers; ++l) h = gnn_layer(h, edges, ps, cfg, l, ctx);
  return h;
}

/// Runs the entity/relation graph and returns relation states as M x M x d.
/// Cells without a relation node (the diagonal when excluded) pass `rels`
/// through.
inline Tensor run_biror(const RelGraph& g, const Tensor& ents, const Tensor& rels,
                        const ParamStore& ps, const GnnConfig& cfg, const RunContext& ctx = {},
                        std::size_t layers = static_cast<std::size_t>(-1)) {
  const std::size_t m = g.num_entities, d = cfg.dim;
  if (ents.dim() != 2 || ents.size(0) != m || ents.size(1) != d) {
    throw ShapeError("run_biror: entities " + shape_str(ents.shape()) + " for M=" +
                     std::to_string(m) + ", d=" + std::to_string(d));
  }
  if (rels.shape() != Shape{m, m, d}) {
    throw ShapeError("run_biror: relations " + shape_str(rels.shape()) + " for M=" +
                     std::to_string(m) + ", d=" + std::to_string(d));
  }
  Tensor rel_flat = reshape(rels, {m * m, d});
  std::vector<std::size_t> cell_rows;
  for (const auto& [i, j] : g.cells) cell_rows.push_back(i * m + j);
  Tensor h0 = cell_rows.empty() ? ents : concat({ents, gather_rows(rel_flat, cell_rows)}, 0);
  Tensor h = run_gnn(g, h0, ps, cfg, ctx, layers);
  if (cell_rows.size() == m * m) {
    return reshape(slice(h, 0, m, m + m * m), {m, m, d});
  }
  // Scatter relation nodes back to their cells; the rest come from `rels`.
  std::vector<std::size_t> pick(m * m);
  for (std::size_t c = 0; c < m * m; ++c) pick[c] = g.num_nodes() + c;
  for (std::size_t k = 0; k < cell_rows.size(); ++k) pick[cell_rows[k]] = m + k;
  return reshape(gather_rows(concat({h, rel_flat}, 0), pick), {m, m, d});
}

}  // namespace relmat
