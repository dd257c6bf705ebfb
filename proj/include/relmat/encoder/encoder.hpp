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

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "relmat/corpus/document.hpp"
#include "relmat/encoder/embedding_file.hpp"
#include "relmat/encoder/vocabulary.hpp"
#include "relmat/error.hpp"
#include "relmat/numerics/nn.hpp"

namespace relmat {

enum class EmbeddingSource { learned, external_file };
enum class EntityIndicator { sentence_index, none };

struct EncoderConfig {
  std::size_t vocab_size = 20000;
  std::size_t embed_dim = 512;
  EmbeddingSource source = EmbeddingSource::learned;
  EntityIndicator entity_indicator = EntityIndicator::sentence_index;
};

inline void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.embed_dim == 0) throw ConfigError("encoder embed_dim must be positive");
  if (cfg.source == EmbeddingSource::learned && cfg.vocab_size < 1) {
    throw ConfigError("encoder vocab_size must be at least 1");
  }
}

/// Registers "enc.*" parameters. The token table and indicator rows exist only
/// in learned mode; the relation-init FFN exists in both.
inline void init_encoder_params(ParamStore& ps, const EncoderConfig& cfg, std::size_t vocab_size,
                                std::mt19937_64& rng) {
  validate_encoder_config(cfg);
  const std::size_t d = cfg.embed_dim;
  if (cfg.source == EmbeddingSource::learned) {
    ps.add("enc.tok", normal_init({vocab_size, d}, 0.02, rng));
    if (cfg.entity_indicator == EntityIndicator::sentence_index) {
      ps.add("enc.indicator", normal_init({2, d}, 0.02, rng));
    }
  }
  add_linear(ps, "enc.rel.ffn1", 2 * d, 2 * d, rng);
  add_linear(ps, "enc.rel.ffn2", 2 * d, d, rng);
}

/// Maps a document to M x d entity vectors.
class EntityEncoder {
 public:
  EntityEncoder(EncoderConfig cfg, Vocabulary vocab)
      : cfg_(cfg), vocab_(std::move(vocab)) {
    validate_encoder_config(cfg_);
    if (cfg_.source != EmbeddingSource::learned) {
      throw ConfigError("external embedding source requires an embedding table");
    }
  }

  EntityEncoder(EncoderConfig cfg, std::shared_ptr<const EmbeddingTable> table)
      : cfg_(cfg), table_(std::move(table)) {
    validate_encoder_config(cfg_);
    if (cfg_.source != EmbeddingSource::external_file || !table_) {
      throw ConfigError("embedding table given but source is not external_file");
    }
    if (table_->dim() != cfg_.embed_dim) {
      throw DataError("embedding file dim " + std::to_string(table_->dim()) +
                      " does not match embed_dim " + std::to_string(cfg_.embed_dim));
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  Tensor embed_entities(const Document& doc, const ParamStore& ps) const {
    const std::size_t m = doc.num_entities();
    const std::size_t d = cfg_.embed_dim;
    if (cfg_.source == EmbeddingSource::external_file) {
      const auto& rows = table_->at(doc.doc_id);
      if (rows.n_entities != m) {
        throw DataError("embedding file has " + std::to_string(rows.n_entities) +
                        " entities for doc '" + doc.doc_id + "', corpus has " +
                        std::to_string(m));
      }
      return Tensor({m, d}, std::vector<double>(rows.rows.begin(), rows.rows.end()));
    }

    // Gather every span token (entities back to back), then pool with an
    // M x L averaging matrix.
    std::vector<std::size_t> ids;
    std::vector<std::size_t> owner;
    for (std::size_t e = 0; e < m; ++e) {
      const auto& ent = doc.entities[e];
      if (ent.start >= ent.end || ent.end > doc.tokens.size()) {
        throw DataError("entity " + std::to_string(e) + " span out of range in doc '" +
                        doc.doc_id + "'");
      }
      for (std::size_t t = ent.start; t < ent.end; ++t) {
        ids.push_back(vocab_.id(doc.tokens[t]));
        owner.push_back(e);
      }
    }
    const Tensor& table = ps.at("enc.tok");
    if (table.size(1) != d) throw ShapeError("enc.tok width does not match embed_dim");
    Tensor tokens = embedding_lookup(table, ids);
    if (cfg_.entity_indicator == EntityIndicator::sentence_index) {
      // every pooled token lies inside a span, so it gets indicator row 1
      tokens = add(tokens, reshape(slice(ps.at("enc.indicator"), 0, 1, 2), {d}));
    }
    std::vector<double> pool(m * ids.size(), 0.0);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto& ent = doc.entities[owner[k]];
      pool[owner[k] * ids.size() + k] = 1.0 / static_cast<double>(ent.length());
    }
    return matmul(Tensor({m, ids.size()}, std::move(pool)), tokens);
  }

 private:
  EncoderConfig cfg_;
  Vocabulary vocab_;
  std::shared_ptr<const EmbeddingTable> table_;
};

/// Cell (i, j) = FFN([e_i ; e_j]), returned as M x M x d.
inline Tensor init_relations(const Tensor& ents, const ParamStore& ps) {
  if (ents.dim() != 2 || ents.size(0) == 0) {
    throw ShapeError("init_relations expects M x d entities with M >= 1, got " +
                     shape_str(ents.shape()));
  }
  const std::size_t m = ents.size(0);
  const std::size_t d = ents.size(1);
  if (ps.at("enc.rel.ffn1.weight").size(0) != 2 * d) {
    throw ShapeError("relation-init FFN expects input width " +
                     std::to_string(ps.at("enc.rel.ffn1.weight").size(0)) + ", got 2 x " +
                     std::to_string(d));
  }
  std::vector<std::size_t> rows, cols;
  rows.reserve(m * m);
  cols.reserve(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      rows.push_back(i);
      cols.push_back(j);
    }
  }
  Tensor pair = concat({gather_rows(ents, rows), gather_rows(ents, cols)}, 1);
  Tensor h = relu(apply_linear(ps, "enc.rel.ffn1", pair));
  Tensor out = apply_linear(ps, "enc.rel.ffn2", h);
  return reshape(out, {m, m, out.size(1)});
}

}  // namespace relmat
