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
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "relmat/analysis/metrics.hpp"
#include "relmat/error.hpp"
#include "relmat/model/model.hpp"
#include "relmat/numerics/optim.hpp"

namespace relmat {

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;    // mean per scored cell
  double val_macro_f1 = -1.0; // -1 without a validation split
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_f1 = -1.0;

  nlohmann::json to_json() const {
    nlohmann::json ep = nlohmann::json::array();
    for (const auto& e : epochs) {
      ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss},
                    {"val_macro_f1", e.val_macro_f1}, {"seconds", e.seconds}});
    }
    return {{"step_losses", step_losses}, {"epochs", ep}, {"best_epoch", best_epoch},
            {"best_val_f1", best_val_f1}};
  }
};

struct TrainOptions {
  std::size_t max_steps = 0;  // 0: epochs * batches
  bool select_best = true;    // restore the best validation checkpoint
  std::function<void(const EpochLog&)> on_epoch;
};

/// Deterministic split: the last `frac` of a seeded shuffle is held out.
inline std::pair<std::vector<Document>, std::vector<Document>> split_train_val(
    const std::vector<Document>& docs, double frac, std::uint64_t seed) {
  std::vector<std::size_t> idx(docs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(frac * static_cast<double>(docs.size())));
  std::vector<Document> train, val;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (k + n_val < idx.size() ? train : val).push_back(docs[idx[k]]);
  }
  return {std::move(train), std::move(val)};
}

/// Macro F1 of `model` on `docs` in the model's own task space.
inline MetricReport evaluate(const Model& model, const std::vector<Document>& docs) {
  std::vector<RelationMatrix> pred, gold;
  for (const auto& d : docs) {
    pred.push_back(model.predict(d).labels);
    RelationMatrix g = d.gold;
    if (model.task() == Task::detection) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g.size(); ++j) g(i, j) = g(i, j) == kNoRelation ? 0 : 1;
      }
    }
    gold.push_back(std::move(g));
  }
  if (model.task() == Task::typing) {
    // only gold-positive cells are in scope for the typing stage
    MetricAccumulator acc(model.relation_names());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (const auto& [i, j] : relation_pairs(gold[d].size(), model.config().include_diagonal)) {
        if (gold[d](i, j) != kNoRelation) acc.add(pred[d](i, j), gold[d](i, j));
      }
    }
    return acc.report();
  }
  const std::vector<std::string> names =
      model.task() == Task::detection ? std::vector<std::string>{"relation"}
                                      : model.relation_names();
  return score(pred, gold, names, model.config().include_diagonal);
}

/// Mini-batch Adam with warmup + cosine decay and global-norm clipping.
inline TrainResult train_model(Model& model, const std::vector<Document>& train,
                               const std::vector<Document>& val, const TrainOptions& opt = {}) {
  const ModelConfig& cfg = model.config();
  if (train.empty()) throw DataError("training set is empty");
  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total = cfg.epochs * batches;
  if (opt.max_steps > 0) total = std::min(total, opt.max_steps);

  Adam adam(AdamConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5deece66dULL);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  RunContext ctx{true, &dropout_rng};
  ParamStore& ps = model.params();

  TrainResult res;
  ParamStore best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && step < total; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t cell_sum = 0;
    for (std::size_t b = 0; b < batches && step < total; ++b) {
      ps.zero_grad();
      Tensor batch_loss = Tensor::scalar(0.0);
      std::size_t cells = 0;
      const std::size_t end = std::min(train.size(), (b + 1) * cfg.batch_size);
      for (std::size_t k = b * cfg.batch_size; k < end; ++k) {
        auto [l, n] = model.loss(train[order[k]], ctx);
        batch_loss = add(batch_loss, l);
        cells += n;
      }
      if (cells == 0) continue;
      const double value = batch_loss.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                              std::to_string(epoch) + ", lr " +
                              std::to_string(lr_at(step, total, cfg.warmup, cfg.peak_lr)) + ")");
      }
      scale(batch_loss, 1.0 / static_cast<double>(cells)).backward();
      if (cfg.clip_norm > 0.0) clip_grad_norm(ps, cfg.clip_norm);
      // lr for update k (1-based) follows the schedule at step k
      adam.step(ps, lr_at(step + 1, total, cfg.warmup, cfg.peak_lr));
      res.step_losses.push_back(value / static_cast<double>(cells));
      loss_sum += value;
      cell_sum += cells;
      ++step;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = cell_sum ? loss_sum / static_cast<double>(cell_sum) : 0.0;
    if (!val.empty()) {
      log.val_macro_f1 = evaluate(model, val).macro_f1;
      if (opt.select_best && log.val_macro_f1 > res.best_val_f1) {
        res.best_val_f1 = log.val_macro_f1;
        res.best_epoch = epoch;
        best = ps.clone();
      }
    } else {
      res.best_epoch = epoch;
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.epochs.push_back(log);
    if (opt.on_epoch) opt.on_epoch(log);
  }
  if (best.size() > 0) {
    for (auto& [name, t] : ps) {
      const auto src = best.at(name).data();
      std::copy(src.begin(), src.end(), t.mutable_data().begin());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Two-stage: binary detection, then typing of detected cells.

struct TwoStageModel {
  Model detector;
  Model typer;
};

/// Detected cells take the typer's best positive class; the rest stay
/// NO_RELATION.
inline RelationMatrix combine_stages(const RelationMatrix& detected, const RelationMatrix& typed) {
  if (detected.size() != typed.size()) throw ShapeError("two-stage outputs differ in size");
  RelationMatrix out(detected.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      if (detected(i, j) != kNoRelation) out(i, j) = typed(i, j);
    }
  }
  return out;
}

inline RelationMatrix predict_two_stage(const TwoStageModel& m, const Document& doc) {
  return combine_stages(m.detector.predict(doc).labels, m.typer.predict(doc).labels);
}

struct TwoStageResult {
  TrainResult detection;
  TrainResult typing;
};

inline TwoStageModel make_two_stage(const ModelConfig& cfg, const std::vector<std::string>& names,
                                    const Vocabulary& vocab) {
  return {Model(cfg, names, vocab, Task::detection), Model(cfg, names, vocab, Task::typing)};
}

inline TwoStageResult train_two_stage(TwoStageModel& m, const std::vector<Document>& train,
                                      const std::vector<Document>& val,
                                      const TrainOptions& opt = {}) {
  TwoStageResult r;
  r.detection = train_model(m.detector, train, val, opt);
  r.typing = train_model(m.typer, train, val, opt);
  return r;
}

}  // namespace relmat
