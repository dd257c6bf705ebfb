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

#include <json.hpp>

#include "relmat/biror/gnn.hpp"
#include "relmat/corpus/document.hpp"
#include "relmat/encoder/encoder.hpp"
#include "relmat/error.hpp"
#include "relmat/model/config.hpp"
#include "relmat/multiror/matrix_transformer.hpp"
#include "relmat/numerics/checkpoint.hpp"

namespace relmat {

/// relation: K+1 classes. detection: NO_RELATION vs any relation. typing:
/// K+1 logits trained only on gold-positive cells.
enum class Task { relation, detection, typing };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::relation: return "relation";
    case Task::detection: return "detection";
    case Task::typing: return "typing";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  if (s == "relation") return Task::relation;
  if (s == "detection") return Task::detection;
  if (s == "typing") return Task::typing;
  throw DataError("unknown task '" + s + "'");
}

struct Prediction {
  std::size_t m = 0;
  std::size_t num_classes = 0;
  std::vector<double> probs;  // M x M x C, softmax over classes
  RelationMatrix labels;

  double prob(std::size_t i, std::size_t j, std::size_t c) const {
    return probs[(i * m + j) * num_classes + c];
  }
};

/// Per-cell training targets; -1 marks cells that are not scored.
inline std::vector<int> cell_targets(const Document& doc, Task task, bool include_diagonal) {
  const std::size_t m = doc.num_entities();
  std::vector<int> y(m * m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j && !include_diagonal) continue;
      const Label g = doc.gold(i, j);
      switch (task) {
        case Task::relation: y[i * m + j] = g; break;
        case Task::detection: y[i * m + j] = g == kNoRelation ? 0 : 1; break;
        case Task::typing: y[i * m + j] = g == kNoRelation ? -1 : g; break;
      }
    }
  }
  return y;
}

class Model {
 public:
  Model(ModelConfig cfg, std::vector<std::string> relation_names, Vocabulary vocab,
        Task task = Task::relation, std::shared_ptr<const EmbeddingTable> table = nullptr)
      : cfg_(std::move(cfg)), names_(std::move(relation_names)), task_(task),
        table_(std::move(table)) {
    cfg_.validate();
    if (names_.empty()) throw ConfigError("model needs at least one relation type");
    if (cfg_.embedding_source == EmbeddingSource::external_file) {
      if (!table_) table_ = std::make_shared<EmbeddingTable>(read_embedding_file(cfg_.embedding_file));
      encoder_ = std::make_unique<EntityEncoder>(cfg_.encoder(), table_);
    } else {
      encoder_ = std::make_unique<EntityEncoder>(cfg_.encoder(), std::move(vocab));
    }
    std::mt19937_64 rng(cfg_.seed);
    init_encoder_params(params_, cfg_.encoder(), encoder_->vocabulary().size(), rng);
    if (uses_biror(cfg_.variant)) init_gnn_params(params_, cfg_.gnn(), rng);
    if (uses_multiror(cfg_.variant)) init_mt_params(params_, cfg_.mt(), rng);
    params_.add("cls.weight", normal_init({cfg_.embed_dim, num_classes()}, cfg_.classifier_init_std, rng));
    params_.add("cls.bias", Tensor::zeros({num_classes()}, true));
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& relation_names() const { return names_; }
  Task task() const { return task_; }
  std::size_t num_classes() const { return task_ == Task::detection ? 2 : names_.size() + 1; }
  const Vocabulary& vocabulary() const { return encoder_->vocabulary(); }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Tensor entity_embeddings(const Document& doc) const {
    return encoder_->embed_entities(doc, params_);
  }

  /// Fused cell representations (M x M x d) for the configured variant.
  Tensor cell_states(const Document& doc, const RunContext& ctx = {}) const {
    const std::size_t m = doc.num_entities();
    if (m == 0) throw DataError("document '" + doc.doc_id + "' has no entities");
    if (uses_multiror(cfg_.variant) && m > cfg_.max_m) {
      throw DataError("document '" + doc.doc_id + "' has " + std::to_string(m) +
                      " entities; max_m is " + std::to_string(cfg_.max_m));
    }
    Tensor ents = entity_embeddings(doc);
    Tensor rels = init_relations(ents, params_);
    return fuse(doc, ents, rels, ctx);
  }

  Tensor fuse(const Document& doc, const Tensor& ents, const Tensor& rels,
              const RunContext& ctx = {}) const {
    switch (cfg_.variant) {
      case Variant::base: return rels;
      case Variant::bi_only:
        return run_biror(build_graph(doc, cfg_.include_diagonal), ents, rels, params_, cfg_.gnn(), ctx);
      case Variant::multi_only: return run_multiror(rels, params_, cfg_.mt(), ctx);
      case Variant::full:
        return add(run_biror(build_graph(doc, cfg_.include_diagonal), ents, rels, params_, cfg_.gnn(), ctx),
                   run_multiror(rels, params_, cfg_.mt(), ctx));
    }
    throw ConfigError("unknown variant");
  }

  /// Class scores, (M*M) x C in row-major cell order.
  Tensor logits(const Document& doc, const RunContext& ctx = {}) const {
    const std::size_t m = doc.num_entities();
    Tensor h = reshape(cell_states(doc, ctx), {m * m, cfg_.embed_dim});
    return linear(h, params_.at("cls.weight"), params_.at("cls.bias"));
  }

  /// Summed cross-entropy over scored cells, and the number of such cells.
  std::pair<Tensor, std::size_t> loss(const Document& doc, const RunContext& ctx = {}) const {
    const auto y = cell_targets(doc, task_, cfg_.include_diagonal);
    std::size_t n = 0;
    for (int v : y) n += v >= 0 ? 1 : 0;
    if (n == 0) return {Tensor::scalar(0.0), 0};
    return {cross_entropy(logits(doc, ctx), y, -1, Reduction::sum), n};
  }

  Prediction predict(const Document& doc) const {
    const std::size_t m = doc.num_entities();
    Tensor p = softmax(logits(doc).detach(), 1);
    Prediction out;
    out.m = m;
    out.num_classes = num_classes();
    out.probs = p.values();
    out.labels = decode(out, task_, cfg_.include_diagonal);
    return out;
  }

  /// Argmax per cell; typing models never emit NO_RELATION off the diagonal.
  static RelationMatrix decode(const Prediction& p, Task task, bool include_diagonal) {
    RelationMatrix labels(p.m);
    const std::size_t first = task == Task::typing ? 1 : 0;
    for (std::size_t i = 0; i < p.m; ++i) {
      for (std::size_t j = 0; j < p.m; ++j) {
        if (i == j && !include_diagonal) continue;
        std::size_t best = first;
        for (std::size_t c = first + 1; c < p.num_classes; ++c) {
          if (p.prob(i, j, c) > p.prob(i, j, best)) best = c;
        }
        labels(i, j) = static_cast<Label>(best);
      }
    }
    return labels;
  }

  nlohmann::json metadata() const {
    return {{"format", 1},
            {"config", cfg_.to_json()},
            {"relations", names_},
            {"task", to_string(task_)},
            {"vocab", encoder_->vocabulary().entries()}};
  }

  void save(const std::string& path, StorageType dtype = StorageType::f64) const {
    save_checkpoint(path, params_, metadata(), dtype);
  }

  static Model from_checkpoint(const Checkpoint& ck,
                               std::shared_ptr<const EmbeddingTable> table = nullptr) {
    try {
      const auto& md = ck.metadata;
      Model m(ModelConfig::from_json(md.at("config")),
              md.at("relations").get<std::vector<std::string>>(),
              Vocabulary(md.at("vocab").get<std::vector<std::string>>()),
              parse_task(md.at("task").get<std::string>()), std::move(table));
      if (ck.params.size() != m.params_.size()) {
        throw DataError("checkpoint has " + std::to_string(ck.params.size()) +
                        " tensors, model expects " + std::to_string(m.params_.size()));
      }
      for (auto& [name, t] : m.params_) {
        if (!ck.params.contains(name)) throw DataError("checkpoint lacks tensor '" + name + "'");
        const Tensor& src = ck.params.at(name);
        if (src.shape() != t.shape()) {
          throw DataError("checkpoint tensor '" + name + "' has shape " +
                          shape_str(src.shape()) + ", model expects " + shape_str(t.shape()));
        }
        std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
      }
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("checkpoint metadata is incomplete: ") + e.what());
    }
  }

  static Model load(const std::string& path,
                    std::shared_ptr<const EmbeddingTable> table = nullptr) {
    return from_checkpoint(load_checkpoint(path), std::move(table));
  }

 private:
  ModelConfig cfg_;
  std::vector<std::string> names_;
  Task task_;
  std::shared_ptr<const EmbeddingTable> table_;
  std::unique_ptr<EntityEncoder> encoder_;
  ParamStore params_;
};

/// Averages member class probabilities per cell, then takes the argmax.
inline Prediction average_predictions(const std::vector<Prediction>& members, Task task,
                                      bool include_diagonal) {
  if (members.empty()) throw ConfigError("ensemble needs at least one member");
  Prediction out = members.front();
  for (std::size_t k = 1; k < members.size(); ++k) {
    const auto& p = members[k];
    if (p.m != out.m || p.num_classes != out.num_classes) {
      throw ConfigError("ensemble members disagree on matrix or class count");
    }
    for (std::size_t i = 0; i < out.probs.size(); ++i) out.probs[i] += p.probs[i];
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  for (double& v : out.probs) v *= inv;
  out.labels = Model::decode(out, task, include_diagonal);
  return out;
}

inline Prediction predict_ensemble(const std::vector<const Model*>& models, const Document& doc) {
  if (models.empty()) throw ConfigError("ensemble needs at least one member");
  const Model& first = *models.front();
  std::vector<Prediction> preds;
  for (const Model* m : models) {
    if (m->task() != first.task() || m->num_classes() != first.num_classes() ||
        m->relation_names() != first.relation_names() ||
        m->config().include_diagonal != first.config().include_diagonal) {
      throw ConfigError("ensemble members were trained with mismatched configs");
    }
    preds.push_back(m->predict(doc));
  }
  return average_predictions(preds, first.task(), first.config().include_diagonal);
}

}  // namespace relmat
