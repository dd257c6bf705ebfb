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
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "relmat/corpus/document.hpp"
#include "relmat/corpus/schema.hpp"
#include "relmat/error.hpp"

namespace relmat {

struct CountCorrelationTarget {
  std::string relation_a;
  std::string relation_b;
  double rho = 0.0;  // target Pearson correlation of per-document counts, in [0, 1)
};

/// Knobs for the synthetic corpus generator.
///
/// Each entity mention is rendered as a span of fixed length
/// `2 + max_links_per_entity`: a type marker "[PER]", a random identifier
/// "id17", then one link token per relation instance the entity takes part in
/// ("L3a" on arg0, "L3b" on arg1, padded with "_"). With probability
/// `type_cue_rate` the two link tokens of an instance also name its relation
/// ("L3a:Per-Soc"); otherwise the type must be inferred from context.
struct SynthConfig {
  std::size_t num_docs = 100;
  std::size_t min_entities = 3;
  std::size_t max_entities = 8;
  // Pool size for identifier and filler words.
  std::size_t vocab_size = 200;
  // Mean number of relation instances per relation type per document.
  double relation_density = 0.6;
  bool plant_type_constraints = true;
  bool plant_symmetry = true;
  std::vector<CountCorrelationTarget> count_correlations;
  double type_cue_rate = 0.5;
  std::size_t max_links_per_entity = 3;
  // Probability of attaching a relation argument to an existing entity.
  double reuse_rate = 0.5;
  // Distinct link indices per document; caps the relation instances per doc.
  std::size_t link_pool = 16;
  std::size_t max_filler = 2;
};

namespace detail {

struct SynthEntity {
  int etype = 0;
  std::vector<std::string> links;
};

inline std::uint64_t doc_stream_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over the pair
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline void validate_synth_config(const TypeSchema& schema, const SynthConfig& cfg) {
  if (cfg.min_entities < 1 || cfg.min_entities > cfg.max_entities) {
    throw ConfigError("synthetic config: need 1 <= min_entities <= max_entities");
  }
  if (cfg.relation_density < 0.0) throw ConfigError("synthetic config: negative relation density");
  if (cfg.type_cue_rate < 0.0 || cfg.type_cue_rate > 1.0 || cfg.reuse_rate < 0.0 ||
      cfg.reuse_rate > 1.0) {
    throw ConfigError("synthetic config: rates must lie in [0, 1]");
  }
  if (cfg.vocab_size == 0) throw ConfigError("synthetic config: vocab_size must be positive");
  if (cfg.relation_density > 0.0 && schema.num_relations() > 0) {
    if (cfg.max_entities < 2) {
      throw ConfigError("synthetic config: relations need at least two entities per document");
    }
    if (cfg.max_links_per_entity == 0 || cfg.link_pool == 0) {
      throw ConfigError("synthetic config: relation density > 0 requires link capacity");
    }
  }
  if (schema.num_entity_types() == 0) throw ConfigError("synthetic config: schema has no entity types");
  std::set<int> used;
  for (const auto& c : cfg.count_correlations) {
    const auto a = schema.relation_index(c.relation_a);
    const auto b = schema.relation_index(c.relation_b);
    if (!a || !b) throw ConfigError("synthetic config: unknown relation in count correlation");
    if (*a == *b) throw ConfigError("synthetic config: count correlation needs two distinct relations");
    if (c.rho < 0.0 || c.rho >= 1.0) {
      throw ConfigError("synthetic config: count correlation target must lie in [0, 1)");
    }
    if (!used.insert(*a).second || !used.insert(*b).second) {
      throw ConfigError("synthetic config: a relation may appear in at most one correlation target");
    }
  }
}

class DocumentSynthesizer {
 public:
  DocumentSynthesizer(const TypeSchema& schema, const SynthConfig& cfg, std::uint64_t seed)
      : schema_(schema), cfg_(cfg), rng_(seed) {}

  Document run(const std::string& doc_id) {
    place_relations(sample_instances());
    const std::size_t target =
        std::uniform_int_distribution<std::size_t>(cfg_.min_entities, cfg_.max_entities)(rng_);
    while (entities_.size() < target) new_entity(random_type(all_types_mask()));
    return render(doc_id);
  }

 private:
  TypeMask all_types_mask() const {
    const auto n = schema_.num_entity_types();
    return n == 64 ? ~TypeMask{0} : (TypeMask{1} << n) - 1;
  }

  int random_type(TypeMask mask) {
    const auto types = schema_.types_in(mask);
    return types[std::uniform_int_distribution<std::size_t>(0, types.size() - 1)(rng_)];
  }

  std::size_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::size_t>(mean)(rng_);
  }

  std::vector<std::size_t> sample_instances() {
    const std::size_t k = schema_.num_relations();
    std::vector<std::size_t> counts(k, 0);
    std::vector<bool> done(k, false);
    const double lambda = cfg_.relation_density;
    for (const auto& c : cfg_.count_correlations) {
      const auto a = static_cast<std::size_t>(*schema_.relation_index(c.relation_a));
      const auto b = static_cast<std::size_t>(*schema_.relation_index(c.relation_b));
      // shared component gives Cov = rho * lambda, Var = lambda
      const std::size_t shared = poisson(c.rho * lambda);
      counts[a] = shared + poisson((1.0 - c.rho) * lambda);
      counts[b] = shared + poisson((1.0 - c.rho) * lambda);
      done[a] = done[b] = true;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (!done[r]) counts[r] = poisson(lambda);
    }
    std::vector<std::size_t> instances;
    for (std::size_t r = 0; r < k; ++r) instances.insert(instances.end(), counts[r], r);
    std::shuffle(instances.begin(), instances.end(), rng_);
    return instances;
  }

  std::size_t new_entity(int etype) {
    entities_.push_back({etype, {}});
    return entities_.size() - 1;
  }

  // Picks an entity for one argument slot; returns npos when impossible.
  std::size_t pick_argument(std::size_t r, int pos, std::size_t other, bool symmetric) {
    constexpr auto npos = static_cast<std::size_t>(-1);
    const TypeMask mask =
        cfg_.plant_type_constraints ? schema_.valid_args(r, pos) : all_types_mask();
    std::vector<std::size_t> candidates;
    for (std::size_t e = 0; e < entities_.size(); ++e) {
      if (e == other) continue;
      if (!((mask >> entities_[e].etype) & 1u)) continue;
      if (entities_[e].links.size() >= cfg_.max_links_per_entity) continue;
      if (other != npos) {
        const auto cell = pos == 1 ? std::make_pair(other, e) : std::make_pair(e, other);
        if (occupied_.count(cell)) continue;
        if (symmetric && occupied_.count({cell.second, cell.first})) continue;
      }
      candidates.push_back(e);
    }
    const bool can_create = entities_.size() < cfg_.max_entities;
    const bool reuse = !candidates.empty() &&
                       (!can_create || std::bernoulli_distribution(cfg_.reuse_rate)(rng_));
    if (reuse) {
      return candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng_)];
    }
    if (can_create) return new_entity(random_type(mask));
    return npos;
  }

  void place_relations(const std::vector<std::size_t>& instances) {
    constexpr auto npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> link_ids(cfg_.link_pool);
    std::iota(link_ids.begin(), link_ids.end(), 0);
    std::shuffle(link_ids.begin(), link_ids.end(), rng_);
    std::size_t next_link = 0;
    for (const std::size_t r : instances) {
      if (next_link >= link_ids.size()) break;
      const bool symmetric = cfg_.plant_symmetry && schema_.relation(r).symmetric;
      const std::size_t a0 = pick_argument(r, 0, npos, symmetric);
      if (a0 == npos) continue;
      const std::size_t a1 = pick_argument(r, 1, a0, symmetric);
      if (a1 == npos) continue;
      const std::size_t link = link_ids[next_link++];
      const bool cue = std::bernoulli_distribution(cfg_.type_cue_rate)(rng_);
      const std::string suffix = cue ? ":" + schema_.relation(r).name : "";
      entities_[a0].links.push_back("L" + std::to_string(link) + "a" + suffix);
      entities_[a1].links.push_back("L" + std::to_string(link) + "b" + suffix);
      relations_.push_back({a0, a1, r});
      occupied_.insert({a0, a1});
      if (symmetric) {
        relations_.push_back({a1, a0, r});
        occupied_.insert({a1, a0});
      }
    }
  }

  std::string filler_word() {
    return "w" + std::to_string(
                     std::uniform_int_distribution<std::size_t>(0, cfg_.vocab_size - 1)(rng_));
  }

  void add_filler(std::vector<std::string>& tokens) {
    const auto n = std::uniform_int_distribution<std::size_t>(0, cfg_.max_filler)(rng_);
    for (std::size_t i = 0; i < n; ++i) tokens.push_back(filler_word());
  }

  Document render(const std::string& doc_id) {
    const std::size_t m = entities_.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::size_t> new_id(m);
    for (std::size_t pos = 0; pos < m; ++pos) new_id[order[pos]] = pos;

    Document doc;
    doc.doc_id = doc_id;
    for (std::size_t pos = 0; pos < m; ++pos) {
      const auto& ent = entities_[order[pos]];
      add_filler(doc.tokens);
      Entity e;
      e.id = pos;
      e.etype = ent.etype;
      e.start = doc.tokens.size();
      doc.tokens.push_back("[" + schema_.entity_types()[ent.etype] + "]");
      doc.tokens.push_back(
          "id" + std::to_string(
                     std::uniform_int_distribution<std::size_t>(0, cfg_.vocab_size - 1)(rng_)));
      auto links = ent.links;
      std::sort(links.begin(), links.end());
      for (auto& l : links) doc.tokens.push_back(std::move(l));
      for (std::size_t k = ent.links.size(); k < cfg_.max_links_per_entity; ++k) {
        doc.tokens.push_back("_");
      }
      e.end = doc.tokens.size();
      doc.entities.push_back(e);
    }
    add_filler(doc.tokens);
    if (doc.tokens.empty()) doc.tokens.push_back(filler_word());

    doc.gold = RelationMatrix(m);
    for (const auto& rel : relations_) {
      doc.gold(new_id[rel.arg0], new_id[rel.arg1]) = label_of_relation(rel.type);
    }
    return doc;
  }

  struct PlacedRelation {
    std::size_t arg0, arg1, type;
  };

  const TypeSchema& schema_;
  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<SynthEntity> entities_;
  std::vector<PlacedRelation> relations_;
  std::set<std::pair<std::size_t, std::size_t>> occupied_;
};

}  // namespace detail

/// Generates a corpus with planted relation-of-relation structure.
/// Each document draws from its own RNG stream derived from (seed, index).
inline Corpus generate_synthetic(const TypeSchema& schema, const SynthConfig& cfg,
                                 std::uint64_t seed) {
  detail::validate_synth_config(schema, cfg);
  Corpus corpus;
  corpus.schema = schema;
  corpus.documents.reserve(cfg.num_docs);
  for (std::size_t i = 0; i < cfg.num_docs; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", i);
    detail::DocumentSynthesizer synth(schema, cfg, detail::doc_stream_seed(seed, i));
    corpus.documents.push_back(synth.run(id));
  }
  return corpus;
}

}  // namespace relmat
