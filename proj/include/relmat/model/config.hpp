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

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <toml.hpp>

#include "relmat/biror/gnn.hpp"
#include "relmat/encoder/encoder.hpp"
#include "relmat/error.hpp"
#include "relmat/multiror/matrix_transformer.hpp"

namespace relmat {

enum class Variant { base, bi_only, multi_only, full };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::bi_only: return "bi_only";
    case Variant::multi_only: return "multi_only";
    case Variant::full: return "full";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "bi_only") return Variant::bi_only;
  if (s == "multi_only") return Variant::multi_only;
  if (s == "full") return Variant::full;
  throw ConfigError("unknown variant '" + s + "' (base|bi_only|multi_only|full)");
}

inline bool uses_biror(Variant v) { return v == Variant::bi_only || v == Variant::full; }
inline bool uses_multiror(Variant v) { return v == Variant::multi_only || v == Variant::full; }

struct ModelConfig {
  Variant variant = Variant::full;

  // encoder
  std::size_t embed_dim = 512;
  std::size_t vocab_size = 20000;
  EmbeddingSource embedding_source = EmbeddingSource::learned;
  std::string embedding_file;
  EntityIndicator entity_indicator = EntityIndicator::sentence_index;

  // biRoR
  std::size_t gnn_heads = 8;
  std::size_t gnn_layers = 4;
  std::size_t gnn_ffn = 1024;
  bool gnn_self_loops = false;
  bool gnn_swap_qk = false;

  // multiRoR
  std::size_t mt_heads = 8;
  std::size_t mt_layers = 4;
  std::size_t mt_ffn = 4096;
  std::size_t max_m = 32;

  double dropout = 0.1;
  double classifier_init_std = 0.02;

  // training
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double peak_lr = 1e-4;
  double warmup = 0.1;
  double clip_norm = 1.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  bool two_stage = false;
  std::size_t ensemble_size = 1;
  double val_fraction = 0.1;
  bool include_diagonal = false;

  /// Small dimensions for single-core experiments. The graph keeps each
  /// node's own state as a message; without it a relation node forgets its
  /// init after one layer and bi_only trails base at this width.
  static ModelConfig desk() {
    ModelConfig c;
    c.embed_dim = 32;
    c.vocab_size = 2000;
    c.gnn_heads = c.mt_heads = 4;
    c.gnn_layers = c.mt_layers = 2;
    c.gnn_ffn = c.mt_ffn = 64;
    c.gnn_self_loops = true;
    c.peak_lr = 3e-3;
    return c;
  }

  EncoderConfig encoder() const {
    return {vocab_size, embed_dim, embedding_source, entity_indicator};
  }
  GnnConfig gnn() const {
    return {embed_dim, gnn_heads, gnn_layers, gnn_ffn, dropout, gnn_self_loops, gnn_swap_qk};
  }
  MatrixTransformerConfig mt() const {
    return {embed_dim, mt_heads, mt_layers, mt_ffn, max_m, dropout};
  }

  void validate() const {
    validate_encoder_config(encoder());
    if (uses_biror(variant)) validate_gnn_config(gnn());
    if (uses_multiror(variant)) validate_mt_config(mt());
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (ensemble_size == 0) throw ConfigError("ensemble_size must be >= 1");
    if (warmup < 0.0 || warmup >= 1.0) throw ConfigError("warmup must lie in [0, 1)");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("val_fraction must lie in [0, 1)");
    if (peak_lr <= 0.0) throw ConfigError("peak_lr must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (embedding_source == EmbeddingSource::external_file && embedding_file.empty()) {
      throw ConfigError("embedding_source=external_file needs embedding_file");
    }
  }

  nlohmann::json to_json() const {
    return {
        {"variant", to_string(variant)},
        {"embed_dim", embed_dim},
        {"vocab_size", vocab_size},
        {"embedding_source",
         embedding_source == EmbeddingSource::learned ? "learned" : "external_file"},
        {"embedding_file", embedding_file},
        {"entity_indicator",
         entity_indicator == EntityIndicator::sentence_index ? "sentence_index" : "none"},
        {"gnn_heads", gnn_heads},
        {"gnn_layers", gnn_layers},
        {"gnn_ffn", gnn_ffn},
        {"gnn_self_loops", gnn_self_loops},
        {"gnn_swap_qk", gnn_swap_qk},
        {"mt_heads", mt_heads},
        {"mt_layers", mt_layers},
        {"mt_ffn", mt_ffn},
        {"max_m", max_m},
        {"dropout", dropout},
        {"classifier_init_std", classifier_init_std},
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"peak_lr", peak_lr},
        {"warmup", warmup},
        {"clip_norm", clip_norm},
        {"weight_decay", weight_decay},
        {"seed", seed},
        {"two_stage", two_stage},
        {"ensemble_size", ensemble_size},
        {"val_fraction", val_fraction},
        {"include_diagonal", include_diagonal},
    };
  }

  /// Overlays the keys present in `j` on top of `base`. Unknown keys are an
  /// error so typos do not silently fall back to defaults.
  static ModelConfig from_json(const nlohmann::json& j, const ModelConfig& base) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    ModelConfig c = base;
    try {
      for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "variant") c.variant = parse_variant(v.get<std::string>());
        else if (k == "embed_dim") c.embed_dim = v.get<std::size_t>();
        else if (k == "vocab_size") c.vocab_size = v.get<std::size_t>();
        else if (k == "embedding_source") {
          const auto s = v.get<std::string>();
          if (s == "learned") c.embedding_source = EmbeddingSource::learned;
          else if (s == "external_file") c.embedding_source = EmbeddingSource::external_file;
          else throw ConfigError("unknown embedding_source '" + s + "'");
        } else if (k == "embedding_file") c.embedding_file = v.get<std::string>();
        else if (k == "entity_indicator") {
          const auto s = v.get<std::string>();
          if (s == "sentence_index") c.entity_indicator = EntityIndicator::sentence_index;
          else if (s == "none") c.entity_indicator = EntityIndicator::none;
          else throw ConfigError("unknown entity_indicator '" + s + "'");
        } else if (k == "gnn_heads") c.gnn_heads = v.get<std::size_t>();
        else if (k == "gnn_layers") c.gnn_layers = v.get<std::size_t>();
        else if (k == "gnn_ffn") c.gnn_ffn = v.get<std::size_t>();
        else if (k == "gnn_self_loops") c.gnn_self_loops = v.get<bool>();
        else if (k == "gnn_swap_qk") c.gnn_swap_qk = v.get<bool>();
        else if (k == "mt_heads") c.mt_heads = v.get<std::size_t>();
        else if (k == "mt_layers") c.mt_layers = v.get<std::size_t>();
        else if (k == "mt_ffn") c.mt_ffn = v.get<std::size_t>();
        else if (k == "max_m") c.max_m = v.get<std::size_t>();
        else if (k == "dropout") c.dropout = v.get<double>();
        else if (k == "classifier_init_std") c.classifier_init_std = v.get<double>();
        else if (k == "epochs") c.epochs = v.get<std::size_t>();
        else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
        else if (k == "peak_lr") c.peak_lr = v.get<double>();
        else if (k == "warmup") c.warmup = v.get<double>();
        else if (k == "clip_norm") c.clip_norm = v.get<double>();
        else if (k == "weight_decay") c.weight_decay = v.get<double>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "two_stage") c.two_stage = v.get<bool>();
        else if (k == "ensemble_size") c.ensemble_size = v.get<std::size_t>();
        else if (k == "val_fraction") c.val_fraction = v.get<double>();
        else if (k == "include_diagonal") c.include_diagonal = v.get<bool>();
        else throw ConfigError("unknown config key '" + k + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
  }

  static ModelConfig from_json(const nlohmann::json& j) { return from_json(j, ModelConfig{}); }
};

/// Reads a .toml or .json file into JSON. Run-level TOML tables are kept as
/// nested objects.
inline nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  const bool is_toml = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
  try {
    if (is_toml) {
      toml::table tbl = toml::parse(in, path);
      std::ostringstream js;
      js << toml::json_formatter{tbl};
      return nlohmann::json::parse(js.str());
    }
    return nlohmann::json::parse(in);
  } catch (const toml::parse_error& e) {
    throw ConfigError("malformed TOML config '" + path + "': " + std::string(e.description()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON config '" + path + "': " + e.what());
  }
}

}  // namespace relmat
