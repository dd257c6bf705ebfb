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


#include <bit>
#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "ace_rules.hpp"
#include "relmat/analysis/cooccurrence.hpp"
#include "relmat/analysis/heatmap.hpp"
#include "relmat/analysis/metrics.hpp"
#include "relmat/analysis/roles.hpp"
#include "relmat/corpus/synthetic.hpp"

namespace relmat {
namespace {

TEST(Rules, MergedAceSchemaGivesPublishedList) {
  const auto schema = ace2005_schema();
  const auto rules = derive_incompatibility_rules(schema, true);
  EXPECT_EQ(rules.size(), 12u);
  EXPECT_EQ(rules, testing::published_rules(schema));
}

TEST(Rules, UnmergedAddsPerSocArg1Duplicates) {
  const auto schema = ace2005_schema();
  const auto rules = derive_incompatibility_rules(schema, false);
  EXPECT_EQ(rules.size(), 16u);
  auto expected = testing::published_rules(schema);
  for (const char* other : {"Part-Whole 0", "Part-Whole 1", "Org-Aff 1", "Art 1"}) {
    const Role a = testing::parse_role(schema, "Per-Soc 1"), b = testing::parse_role(schema, other);
    expected.insert({std::min(a, b), std::max(a, b)});
  }
  EXPECT_EQ(rules, expected);
}

TEST(Rules, SharedTypeSchemaHasNone) {
  const auto schema = TypeSchema::from_json(
      {{"entity_types", {"A", "B"}},
       {"relations",
        {{{"name", "r"}, {"symmetric", false}, {"arg0_types", {"A"}}, {"arg1_types", {"A", "B"}}},
         {{"name", "s"}, {"symmetric", true}, {"arg0_types", {"A"}}, {"arg1_types", {"A"}}}}}});
  EXPECT_TRUE(derive_incompatibility_rules(schema, true).empty());
  EXPECT_TRUE(derive_incompatibility_rules(schema, false).empty());
}

TEST(Roles, MergingDropsSymmetricArg1) {
  const auto schema = ace2005_schema();
  EXPECT_EQ(schema_roles(schema, true).size(), 11u);
  EXPECT_EQ(schema_roles(schema, false).size(), 12u);
  EXPECT_EQ(role_name(schema, {0, 1}), "Per-Soc (arg1)");
  EXPECT_EQ(role_name(schema, {0, 0}, true), "Per-Soc");
}

// Independent count: subsets by bitmask for the distinct convention; for
// multisets, each support set S of size s contributes C(k-1, s-1) multisets.
std::pair<std::size_t, std::size_t> oracle_invalid(const TypeSchema& schema, std::size_t k,
                                                   bool distinct) {
  std::vector<TypeMask> masks;
  for (std::size_t r = 0; r < schema.num_relations(); ++r) {
    masks.push_back(schema.valid_args(r, 0));
    if (!(distinct && schema.relation(r).symmetric)) masks.push_back(schema.valid_args(r, 1));
  }
  auto choose = [](std::size_t n, std::size_t c) {
    if (c > n) return std::size_t{0};
    std::size_t v = 1;
    for (std::size_t i = 1; i <= c; ++i) v = v * (n - c + i) / i;
    return v;
  };
  std::size_t invalid = 0, total = 0;
  const std::size_t n = masks.size();
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    const auto size = static_cast<std::size_t>(std::popcount(s));
    if (size > k) continue;
    std::size_t ways;
    if (distinct) {
      if (size != k) continue;
      ways = 1;
    } else {
      ways = choose(k - 1, size - 1);
    }
    TypeMask acc = ~TypeMask{0};
    for (std::size_t i = 0; i < n; ++i) {
      if (s & (1u << i)) acc &= masks[i];
    }
    total += ways;
    if (acc == 0) invalid += ways;
  }
  return {invalid, total};
}

TEST(InvalidFraction, PairsUnderBothConventions) {
  const auto schema = ace2005_schema();
  const auto merged = invalid_fraction(schema, 2, CombinationConvention::distinct_roles_merged);
  EXPECT_EQ(merged.invalid, 12u);
  EXPECT_EQ(merged.total, 55u);
  EXPECT_NEAR(merged.percent(), 100.0 * 12 / 55, 1e-12);
  const auto multi = invalid_fraction(schema, 2, CombinationConvention::multiset_all_roles);
  EXPECT_EQ(multi.invalid, 16u);
  EXPECT_EQ(multi.total, 78u);
}

TEST(InvalidFraction, SingleRoleNeverInvalid) {
  const auto schema = ace2005_schema();
  for (auto conv : {CombinationConvention::distinct_roles_merged,
                    CombinationConvention::multiset_all_roles}) {
    EXPECT_EQ(invalid_fraction(schema, 1, conv).percent(), 0.0);
  }
}

TEST(InvalidFraction, MatchesSubsetOracleAndIsMonotone) {
  const auto schema = ace2005_schema();
  for (bool distinct : {true, false}) {
    const auto conv = distinct ? CombinationConvention::distinct_roles_merged
                               : CombinationConvention::multiset_all_roles;
    double prev = -1;
    for (std::size_t k = 1; k <= 7; ++k) {
      const auto f = invalid_fraction(schema, k, conv);
      const auto [inv, tot] = oracle_invalid(schema, k, distinct);
      EXPECT_EQ(f.invalid, inv) << k;
      EXPECT_EQ(f.total, tot) << k;
      EXPECT_GE(f.percent(), prev);
      prev = f.percent();
    }
  }
}

TEST(InvalidFraction, Errors) {
  const auto schema = ace2005_schema();
  EXPECT_THROW(invalid_fraction(schema, 0, CombinationConvention::multiset_all_roles), ConfigError);
  EXPECT_THROW(invalid_fraction(schema, 12, CombinationConvention::distinct_roles_merged),
               ConfigError);
  EXPECT_NO_THROW(invalid_fraction(schema, 11, CombinationConvention::distinct_roles_merged));
}

Corpus hand_corpus() {
  Corpus c;
  c.schema = ace2005_schema();
  Document d;
  d.doc_id = "h";
  d.entities.resize(3);
  d.gold = RelationMatrix(3);
  d.gold(0, 1) = label_of_relation(2);  // Phys
  d.gold(1, 2) = label_of_relation(1);  // Part-Whole
  c.documents.push_back(d);
  return c;
}

TEST(Conditional, HandCountedRoles) {
  const auto cm = conditional_matrix(hand_corpus(), Granularity::role);
  ASSERT_EQ(cm.size(), 12u);
  const auto phys1 = role_index({2, 1}), pw0 = role_index({1, 0}), phys0 = role_index({2, 0});
  EXPECT_EQ(cm.bearers[phys1], 1u);
  EXPECT_DOUBLE_EQ(cm.prob[phys1][pw0], 1.0);
  EXPECT_DOUBLE_EQ(cm.prob[pw0][phys1], 1.0);
  EXPECT_DOUBLE_EQ(cm.prob[pw0][phys0], 0.0);
  EXPECT_DOUBLE_EQ(cm.display[pw0][phys0], -1.0);
  EXPECT_TRUE(cm.row_empty(role_index({0, 0})));
  EXPECT_EQ(cm.labels[phys1], "Phys (arg1)");
}

TEST(Conditional, HandCountedRelations) {
  const auto cm = conditional_matrix(hand_corpus(), Granularity::relation);
  ASSERT_EQ(cm.size(), 6u);
  EXPECT_EQ(cm.bearers[2], 2u);
  EXPECT_DOUBLE_EQ(cm.prob[2][1], 0.5);
  EXPECT_DOUBLE_EQ(cm.prob[1][2], 0.5);
  EXPECT_DOUBLE_EQ(cm.prob[2][2], 1.0);
  EXPECT_DOUBLE_EQ(cm.display[0][1], -1.0);
}

TEST(Conditional, PlantedSymmetryGivesCertainty) {
  SynthConfig sc;
  sc.num_docs = 50;
  const auto corpus = generate_synthetic(ace2005_schema(), sc, 5);
  const auto cm = conditional_matrix(corpus, Granularity::role);
  ASSERT_GT(cm.bearers[role_index({0, 0})], 0u);
  EXPECT_DOUBLE_EQ(cm.prob[role_index({0, 0})][role_index({0, 1})], 1.0);
  EXPECT_DOUBLE_EQ(cm.prob[role_index({0, 1})][role_index({0, 0})], 1.0);
}

TEST(Conditional, EveryRuleIsAZeroCell) {
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthConfig sc;
    sc.num_docs = 200;
    const auto corpus = generate_synthetic(ace2005_schema(), sc, seed);
    const auto cm = conditional_matrix(corpus, Granularity::role);
    for (const auto& [a, b] : derive_incompatibility_rules(corpus.schema, false)) {
      EXPECT_EQ(cm.display[role_index(a)][role_index(b)], -1.0);
      EXPECT_EQ(cm.display[role_index(b)][role_index(a)], -1.0);
    }
  }
}

TEST(CountCorrelation, PerfectlyLinear) {
  Corpus c;
  c.schema = ace2005_schema();
  for (std::size_t n = 1; n <= 4; ++n) {
    Document d;
    d.doc_id = std::to_string(n);
    d.entities.resize(2 * n);
    d.gold = RelationMatrix(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
      d.gold(2 * k, 2 * k + 1) = label_of_relation(1);
      d.gold(2 * k + 1, 2 * k) = label_of_relation(2);
    }
    c.documents.push_back(d);
  }
  const auto cc = count_correlation(c);
  EXPECT_NEAR(cc.r[1][2], 1.0, 1e-12);
  EXPECT_FALSE(cc.defined[0][1]);  // Per-Soc never occurs
  EXPECT_TRUE(std::isnan(cc.r[0][1]));
  EXPECT_TRUE(cc.to_json()["r"][0][1].is_null());
}

TEST(CountCorrelation, IndependentTypesAreUncorrelated) {
  SynthConfig sc;
  sc.num_docs = 1000;
  sc.max_entities = 12;
  sc.link_pool = 64;
  const auto cc = count_correlation(generate_synthetic(ace2005_schema(), sc, 17));
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      if (a != b) EXPECT_LT(std::abs(cc.r[a][b]), 0.1) << a << "," << b;
    }
  }
}

TEST(CountCorrelation, NeedsTwoDocuments) {
  EXPECT_THROW(count_correlation(hand_corpus()), DataError);
}

TEST(Js, KnownValues) {
  EXPECT_EQ(js_distance(std::vector<double>{0.2, 0.8}, std::vector<double>{0.2, 0.8}), 0.0);
  EXPECT_NEAR(js_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 1.0, 1e-12);
  // (1,0) vs (1/2,1/2): 0.5*log2(4/3) + 0.25*log2(2/3) + 0.25*log2(2)
  const double div = 0.5 * std::log2(4.0 / 3) + 0.25 * std::log2(2.0 / 3) + 0.25;
  EXPECT_NEAR(js_distance(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}),
              std::sqrt(div), 1e-14);
  // unnormalized rows are scaled first
  EXPECT_NEAR(js_distance(std::vector<double>{2, 0}, std::vector<double>{3, 3}), std::sqrt(div),
              1e-14);
}

TEST(Js, SymmetricOnRandomRows) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(6), q(6);
    for (auto& x : p) x = u(rng);
    for (auto& x : q) x = u(rng);
    const double d = js_distance(p, q);
    EXPECT_EQ(d, js_distance(q, p));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Js, Errors) {
  EXPECT_THROW(js_distance(std::vector<double>{1}, std::vector<double>{1, 0}), ShapeError);
  EXPECT_THROW(js_distance(std::vector<double>{0, 0}, std::vector<double>{1, 0}), DataError);
  EXPECT_THROW(js_distance(std::vector<double>{-1, 2}, std::vector<double>{1, 0}), DataError);
}

TEST(Js, MatrixAverageSkipsEmptyRows) {
  const auto gold = conditional_matrix(hand_corpus(), Granularity::relation);
  const auto same = js_distance(gold, gold);
  EXPECT_EQ(same.mean, 0.0);
  EXPECT_EQ(same.rows_used, 2u);  // Part-Whole, Phys
  EXPECT_EQ(same.rows_excluded, 4u);
  EXPECT_TRUE(std::isnan(same.per_row[0]));
  CondMatrix pred = gold;
  pred.prob[1] = {0, 0, 1, 0, 0, 0};  // Part-Whole row now all on Phys
  const auto r = js_distance(pred, gold);
  EXPECT_NEAR(r.per_row[1], js_distance(pred.prob[1], gold.prob[1]), 0.0);
  EXPECT_NEAR(r.mean, r.per_row[1] / 2, 1e-15);
}

// Brute-force confusion counts.
struct Oracle {
  double macro = 0, micro = 0;
};

Oracle oracle_score(const std::vector<RelationMatrix>& pred, const std::vector<RelationMatrix>& gold,
                    int k) {
  Oracle o;
  double tp_all = 0, fp_all = 0, fn_all = 0, sum = 0;
  int used = 0;
  for (int c = 1; c <= k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t d = 0; d < pred.size(); ++d) {
      for (std::size_t i = 0; i < gold[d].size(); ++i) {
        for (std::size_t j = 0; j < gold[d].size(); ++j) {
          if (i == j) continue;
          const bool p = pred[d](i, j) == c, g = gold[d](i, j) == c;
          tp += p && g;
          fp += p && !g;
          fn += !p && g;
        }
      }
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    if (tp + fp + fn == 0) continue;
    ++used;
    sum += tp == 0 ? 0.0 : 100.0 * 2 * tp / (2 * tp + fp + fn);
  }
  o.macro = used ? sum / used : 0.0;
  o.micro = tp_all == 0 ? 0.0 : 100.0 * 2 * tp_all / (2 * tp_all + fp_all + fn_all);
  return o;
}

TEST(Score, MatchesBruteForceOracle) {
  std::mt19937_64 rng(8);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int t = 0; t < 50; ++t) {
    std::vector<RelationMatrix> pred, gold;
    const std::size_t docs = 1 + rng() % 3;
    for (std::size_t d = 0; d < docs; ++d) {
      const std::size_t m = 1 + rng() % 4;
      RelationMatrix p(m), g(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          p(i, j) = static_cast<Label>(rng() % 4 < 2 ? 0 : rng() % 4);
          g(i, j) = static_cast<Label>(rng() % 4 < 2 ? 0 : rng() % 4);
        }
      }
      pred.push_back(p);
      gold.push_back(g);
    }
    const auto rep = score(pred, gold, names);
    const auto o = oracle_score(pred, gold, 3);
    EXPECT_NEAR(rep.macro_f1, o.macro, 1e-9);
    EXPECT_NEAR(rep.micro_f1, o.micro, 1e-9);
  }
}

TEST(Score, NoRelationIsNegative) {
  RelationMatrix g(2), p(2);
  g(0, 1) = 1;
  // predicting nothing: no true positives, no credit for the NO_RELATION cell
  auto rep = score({p}, {g}, {"a", "b"});
  EXPECT_EQ(rep.micro_f1, 0.0);
  EXPECT_EQ(rep.macro_classes, 1u);
  EXPECT_EQ(rep.cells, 2u);
  // perfect prediction
  rep = score({g}, {g}, {"a", "b"});
  EXPECT_EQ(rep.macro_f1, 100.0);
  // diagonal labels are ignored unless requested
  p = g;
  p(0, 0) = 2;
  EXPECT_EQ(score({p}, {g}, {"a", "b"}).macro_f1, 100.0);
  EXPECT_LT(score({p}, {g}, {"a", "b"}, true).macro_f1, 100.0);
}

TEST(Score, Errors) {
  EXPECT_THROW(score({RelationMatrix(2)}, {}, {"a"}), DataError);
  EXPECT_THROW(score({RelationMatrix(2)}, {RelationMatrix(3)}, {"a"}), DataError);
  RelationMatrix bad(2);
  bad(0, 1) = 5;
  EXPECT_THROW(score({bad}, {RelationMatrix(2)}, {"a"}), DataError);
  EXPECT_TRUE(score({}, {}, {"a"}).empty);
}

TEST(SubsetF1, KeepsCellsTouchingBusyEntities) {
  // entity 0 has three gold relations, the others at most one
  RelationMatrix g(4), p(4);
  g(0, 1) = 1;
  g(0, 2) = 1;
  g(3, 0) = 2;
  p = g;
  p(1, 2) = 2;  // false positive away from entity 0
  const auto all = score({p}, {g}, {"a", "b"});
  const auto busy = subset_f1({p}, {g}, {"a", "b"}, 3);
  EXPECT_LT(all.macro_f1, 100.0);
  EXPECT_EQ(busy.macro_f1, 100.0);
  EXPECT_EQ(busy.cells, 6u);  // row 0 and column 0, off the diagonal
  EXPECT_EQ(subset_f1({p}, {g}, {"a", "b"}, 4).cells, 0u);
  EXPECT_THROW(subset_f1({p}, {g}, {"a"}, 0), ConfigError);
}

TEST(Heatmap, CsvLayout) {
  const std::string csv = heatmap_csv({{1.0, -1.0}, {0.5, std::nan("")}}, {"x", "y"});
  EXPECT_EQ(csv, ",x,y\nx,1,-1\ny,0.5,\n");
}

TEST(Heatmap, SvgHasOneRectPerCell) {
  const std::string svg = heatmap_svg({{1.0, -1.0}, {0.5, 0.0}}, {"a<b", "y"});
  std::size_t rects = 0;
  for (std::size_t p = 0; (p = svg.find("<rect", p)) != std::string::npos; ++p) ++rects;
  EXPECT_EQ(rects, 4u);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
}

TEST(MetricReport, JsonFields) {
  const auto j = score({RelationMatrix(2)}, {RelationMatrix(2)}, {"a"}).to_json();
  EXPECT_TRUE(j.contains("macro_f1"));
  EXPECT_EQ(j["per_class"].size(), 1u);
}

}  // namespace
}  // namespace relmat
