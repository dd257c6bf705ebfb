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

#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/corpus/document.hpp"
#include "relmat/error.hpp"

namespace relmat {

struct ClassScore {
  std::string name;
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t support = 0;  // gold cells of this class
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // percent
};

struct MetricReport {
  std::vector<ClassScore> per_class;  // positive classes, label order
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double precision = 0.0;  // micro
  double recall = 0.0;     // micro
  std::size_t cells = 0;   // scored cells
  std::size_t macro_classes = 0;
  bool empty = false;

  nlohmann::json to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : per_class) {
      classes.push_back({{"name", c.name}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn},
                         {"support", c.support}, {"precision", c.precision},
                         {"recall", c.recall}, {"f1", c.f1}});
    }
    return {{"macro_f1", macro_f1}, {"micro_f1", micro_f1}, {"precision", precision},
            {"recall", recall}, {"cells", cells}, {"macro_classes", macro_classes},
            {"empty", empty}, {"per_class", classes}};
  }
};

namespace detail {

inline double safe_ratio(std::size_t a, std::size_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

inline double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace detail

/// Accumulates per-cell decisions. Label 0 is the negative class.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::vector<std::string> class_names)
      : names_(std::move(class_names)), tp_(names_.size()), fp_(names_.size()),
        fn_(names_.size()) {}

  void add(Label pred, Label gold) {
    check(pred);
    check(gold);
    ++cells_;
    if (pred == gold) {
      if (gold != kNoRelation) ++tp_[gold - 1];
      return;
    }
    if (pred != kNoRelation) ++fp_[pred - 1];
    if (gold != kNoRelation) ++fn_[gold - 1];
  }

  MetricReport report() const {
    MetricReport rep;
    rep.cells = cells_;
    rep.empty = cells_ == 0;
    std::size_t tp = 0, fp = 0, fn = 0;
    double macro = 0.0;
    for (std::size_t c = 0; c < names_.size(); ++c) {
      ClassScore s;
      s.name = names_[c];
      s.tp = tp_[c];
      s.fp = fp_[c];
      s.fn = fn_[c];
      s.support = tp_[c] + fn_[c];
      const double p = detail::safe_ratio(s.tp, s.tp + s.fp);
      const double r = detail::safe_ratio(s.tp, s.tp + s.fn);
      s.precision = 100.0 * p;
      s.recall = 100.0 * r;
      s.f1 = 100.0 * detail::f1_of(p, r);
      // Classes never seen in gold or prediction carry no evidence.
      if (s.tp + s.fp + s.fn > 0) {
        macro += s.f1;
        ++rep.macro_classes;
      }
      tp += s.tp;
      fp += s.fp;
      fn += s.fn;
      rep.per_class.push_back(std::move(s));
    }
    rep.macro_f1 = rep.macro_classes == 0 ? 0.0 : macro / static_cast<double>(rep.macro_classes);
    const double p = detail::safe_ratio(tp, tp + fp);
    const double r = detail::safe_ratio(tp, tp + fn);
    rep.precision = 100.0 * p;
    rep.recall = 100.0 * r;
    rep.micro_f1 = 100.0 * detail::f1_of(p, r);
    return rep;
  }

 private:
  void check(Label l) const {
    if (l < 0 || static_cast<std::size_t>(l) > names_.size()) {
      throw DataError("label " + std::to_string(l) + " outside the " +
                      std::to_string(names_.size()) + " relation classes");
    }
  }

  std::vector<std::string> names_;
  std::vector<std::size_t> tp_, fp_, fn_;
  std::size_t cells_ = 0;
};

inline std::vector<std::string> relation_names(const TypeSchema& schema) {
  std::vector<std::string> out;
  for (const auto& r : schema.relations()) out.push_back(r.name);
  return out;
}

namespace detail {

inline void check_aligned(const std::vector<RelationMatrix>& pred,
                          const std::vector<RelationMatrix>& gold) {
  if (pred.size() != gold.size()) {
    throw DataError("score: " + std::to_string(pred.size()) + " predicted vs " +
                    std::to_string(gold.size()) + " gold documents");
  }
  for (std::size_t d = 0; d < pred.size(); ++d) {
    if (pred[d].size() != gold[d].size()) {
      throw DataError("score: document " + std::to_string(d) + " has " +
                      std::to_string(pred[d].size()) + " predicted vs " +
                      std::to_string(gold[d].size()) + " gold entities");
    }
  }
}

/// Gold positive cells in row i plus column i, off the diagonal.
inline std::vector<std::size_t> entity_relation_counts(const RelationMatrix& g) {
  const std::size_t m = g.size();
  std::vector<std::size_t> n(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j && g(i, j) != kNoRelation) {
        ++n[i];
        ++n[j];
      }
    }
  }
  return n;
}

}  // namespace detail

/// Scores every ordered off-diagonal cell (diagonal too if asked).
inline MetricReport score(const std::vector<RelationMatrix>& pred,
                          const std::vector<RelationMatrix>& gold,
                          const std::vector<std::string>& class_names,
                          bool include_diagonal = false) {
  detail::check_aligned(pred, gold);
  MetricAccumulator acc(class_names);
  for (std::size_t d = 0; d < pred.size(); ++d) {
    for (const auto& [i, j] : relation_pairs(gold[d].size(), include_diagonal)) {
      acc.add(pred[d](i, j), gold[d](i, j));
    }
  }
  return acc.report();
}

/// Like score(), restricted to cells touching an entity with at least
/// `min_relations` gold relations.
inline MetricReport subset_f1(const std::vector<RelationMatrix>& pred,
                              const std::vector<RelationMatrix>& gold,
                              const std::vector<std::string>& class_names,
                              std::size_t min_relations) {
  if (min_relations < 1) throw ConfigError("subset_f1: min_relations must be >= 1");
  detail::check_aligned(pred, gold);
  MetricAccumulator acc(class_names);
  for (std::size_t d = 0; d < pred.size(); ++d) {
    const auto counts = detail::entity_relation_counts(gold[d]);
    for (const auto& [i, j] : relation_pairs(gold[d].size(), false)) {
      if (counts[i] >= min_relations || counts[j] >= min_relations) {
        acc.add(pred[d](i, j), gold[d](i, j));
      }
    }
  }
  return acc.report();
}

inline std::vector<RelationMatrix> gold_matrices(const Corpus& c) {
  std::vector<RelationMatrix> out;
  for (const auto& d : c.documents) out.push_back(d.gold);
  return out;
}

}  // namespace relmat
