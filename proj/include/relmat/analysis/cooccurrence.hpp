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
#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/analysis/roles.hpp"
#include "relmat/corpus/document.hpp"
#include "relmat/error.hpp"

namespace relmat {

enum class Granularity { role, relation };

/// P(entity bears b | it bears a) over all entities of a corpus.
struct CondMatrix {
  std::vector<std::string> labels;
  std::vector<std::size_t> bearers;            // entities bearing each row label
  std::vector<std::vector<double>> prob;       // 0 rows for empty labels
  std::vector<std::vector<double>> display;    // zero co-occurrence shown as -1

  std::size_t size() const { return labels.size(); }
  bool row_empty(std::size_t a) const { return bearers[a] == 0; }

  nlohmann::json to_json() const {
    return {{"labels", labels}, {"bearers", bearers}, {"prob", prob}, {"display", display}};
  }
};

/// Index of a role at role granularity: relation r arg p -> 2r + p.
inline std::size_t role_index(const Role& r) { return 2 * r.relation + static_cast<std::size_t>(r.arg_pos); }

inline CondMatrix conditional_matrix(const Corpus& corpus, Granularity g) {
  const auto& schema = corpus.schema;
  const std::size_t k = schema.num_relations();
  CondMatrix cm;
  if (g == Granularity::role) {
    for (std::size_t r = 0; r < k; ++r) {
      for (int p = 0; p < 2; ++p) cm.labels.push_back(role_name(schema, {r, p}));
    }
  } else {
    for (const auto& rel : schema.relations()) cm.labels.push_back(rel.name);
  }
  const std::size_t n = cm.labels.size();
  cm.bearers.assign(n, 0);
  std::vector<std::vector<std::size_t>> co(n, std::vector<std::size_t>(n, 0));
  for (const auto& doc : corpus.documents) {
    const std::size_t m = doc.num_entities();
    std::vector<std::vector<char>> has(m, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const Label l = doc.gold(i, j);
        if (l == kNoRelation) continue;
        const std::size_t r = relation_of_label(l);
        if (g == Granularity::role) {
          has[i][role_index({r, 0})] = 1;
          has[j][role_index({r, 1})] = 1;
        } else {
          has[i][r] = has[j][r] = 1;
        }
      }
    }
    for (std::size_t e = 0; e < m; ++e) {
      for (std::size_t a = 0; a < n; ++a) {
        if (!has[e][a]) continue;
        ++cm.bearers[a];
        for (std::size_t b = 0; b < n; ++b) co[a][b] += has[e][b] ? 1 : 0;
      }
    }
  }
  cm.prob.assign(n, std::vector<double>(n, 0.0));
  cm.display.assign(n, std::vector<double>(n, -1.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (cm.bearers[a] == 0) continue;
      cm.prob[a][b] = static_cast<double>(co[a][b]) / static_cast<double>(cm.bearers[a]);
      if (co[a][b] > 0) cm.display[a][b] = cm.prob[a][b];
    }
  }
  return cm;
}

/// Pearson correlation of per-document relation counts.
struct CountCorrelation {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> r;       // NaN where undefined
  std::vector<std::vector<bool>> defined;   // false if either type has constant counts

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < r.size(); ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t b = 0; b < r.size(); ++b) {
        row.push_back(defined[a][b] ? nlohmann::json(r[a][b]) : nlohmann::json(nullptr));
      }
      rows.push_back(row);
    }
    return {{"labels", labels}, {"r", rows}};
  }
};

inline std::vector<std::vector<double>> relation_counts(const Corpus& corpus) {
  const std::size_t k = corpus.schema.num_relations();
  std::vector<std::vector<double>> counts;
  for (const auto& doc : corpus.documents) {
    std::vector<double> c(k, 0.0);
    for (Label l : doc.gold.cells()) {
      if (l != kNoRelation) c[relation_of_label(l)] += 1.0;
    }
    counts.push_back(std::move(c));
  }
  return counts;
}

inline CountCorrelation count_correlation(const Corpus& corpus) {
  if (corpus.size() < 2) throw DataError("count_correlation needs at least 2 documents");
  const std::size_t k = corpus.schema.num_relations();
  const auto counts = relation_counts(corpus);
  const double n = static_cast<double>(counts.size());
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (const auto& c : counts) {
    for (std::size_t a = 0; a < k; ++a) mean[a] += c[a] / n;
  }
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (const auto& c : counts) {
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) cov[a][b] += (c[a] - mean[a]) * (c[b] - mean[b]);
    }
  }
  for (std::size_t a = 0; a < k; ++a) sd[a] = std::sqrt(cov[a][a]);
  CountCorrelation out;
  for (const auto& rel : corpus.schema.relations()) out.labels.push_back(rel.name);
  out.r.assign(k, std::vector<double>(k, std::nan("")));
  out.defined.assign(k, std::vector<bool>(k, false));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (sd[a] == 0.0 || sd[b] == 0.0) continue;
      out.defined[a][b] = true;
      out.r[a][b] = a == b ? 1.0 : cov[a][b] / (sd[a] * sd[b]);
    }
  }
  return out;
}

/// sqrt of the base-2 Jensen-Shannon divergence; inputs are normalized first.
inline double js_distance(std::vector<double> p, std::vector<double> q) {
  if (p.size() != q.size()) throw ShapeError("js_distance: distributions differ in length");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw DataError("js_distance: negative mass");
    sp += p[i];
    sq += q[i];
  }
  if (sp == 0.0 || sq == 0.0) throw DataError("js_distance: empty distribution");
  double div = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i] / sp, b = q[i] / sq, mid = 0.5 * (a + b);
    const double ta = a > 0.0 ? 0.5 * a * std::log2(a / mid) : 0.0;
    const double tb = b > 0.0 ? 0.5 * b * std::log2(b / mid) : 0.0;
    div += ta + tb;  // one sum per element keeps d(p,q) == d(q,p) exactly
  }
  return std::sqrt(std::max(0.0, div));
}

struct JsReport {
  double mean = 0.0;
  std::vector<double> per_row;  // NaN for excluded rows
  std::size_t rows_used = 0;
  std::size_t rows_excluded = 0;
};

/// Averages the row-wise JS distance over rows observed in both matrices.
inline JsReport js_distance(const CondMatrix& pred, const CondMatrix& gold) {
  if (pred.labels != gold.labels) throw DataError("js_distance: matrices index different labels");
  JsReport rep;
  double total = 0.0;
  for (std::size_t a = 0; a < pred.size(); ++a) {
    double sp = 0.0, sg = 0.0;
    for (double v : pred.prob[a]) sp += v;
    for (double v : gold.prob[a]) sg += v;
    if (pred.row_empty(a) || gold.row_empty(a) || sp == 0.0 || sg == 0.0) {
      rep.per_row.push_back(std::nan(""));
      ++rep.rows_excluded;
      continue;
    }
    const double d = js_distance(pred.prob[a], gold.prob[a]);
    rep.per_row.push_back(d);
    total += d;
    ++rep.rows_used;
  }
  rep.mean = rep.rows_used == 0 ? 0.0 : total / static_cast<double>(rep.rows_used);
  return rep;
}

}  // namespace relmat
