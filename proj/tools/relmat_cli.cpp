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


// relmat: train, evaluate and analyse relation-matrix extraction models.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "relmat/analysis/cooccurrence.hpp"
#include "relmat/analysis/heatmap.hpp"
#include "relmat/analysis/metrics.hpp"
#include "relmat/analysis/roles.hpp"
#include "relmat/corpus/io.hpp"
#include "relmat/corpus/synthetic.hpp"
#include "relmat/model/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace relmat;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

// Shared flag values; each subcommand reads the ones it registers.
struct Options {
  std::string config, corpus, dev_corpus, schema, out, preset = "desk";
  std::vector<std::string> ckpts;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> epochs;
  bool two_stage = false;
  std::size_t ensemble = 0;
  std::size_t workers = 1;

  // analyze / synth
  bool no_merge = false, as_json = false;
  std::size_t k_max = 7, min_relations = 0, docs = 100;
  std::string granularity = "role", kind = "cond", pred, gold;
  double cue_rate = 0.5, density = 0.6;
  std::size_t max_entities = 8;
  std::vector<std::string> correlate;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string iso_time() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

TypeSchema load_schema_or_default(const std::string& path) {
  if (path.empty()) return ace2005_schema();
  return load_schema(path);
}

Corpus load_corpus_checked(const std::string& path, const TypeSchema& schema) {
  if (path.empty()) throw UsageError("--corpus is required");
  LoadReport rep;
  Corpus c = load_corpus(path, schema, false, &rep);
  if (rep.schema_warnings > 0) {
    spdlog::warn("{}: {} documents violate the schema type constraints", path, rep.schema_warnings);
  }
  spdlog::info("loaded {} documents from {}", c.size(), path);
  return c;
}

// Output directory filled under a staging name and renamed into place.
class OutDir {
 public:
  explicit OutDir(const std::string& path) : final_(path.empty() ? "relmat-out" : path) {
    staging_ = final_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }

  fs::path file(const std::string& name) const { return staging_ / name; }
  const fs::path& final_path() const { return final_; }

  void commit() {
    if (fs::exists(final_)) {
      if (!fs::exists(final_ / "run.json")) {
        throw IoError("refusing to replace '" + final_.string() + "': not a relmat output directory");
      }
      fs::remove_all(final_);
    }
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    fs::rename(staging_, final_);
  }

 private:
  fs::path final_, staging_;
};

void write_json(const fs::path& p, const json& j) { write_text_file(p.string(), j.dump(2) + "\n"); }

// Model config from preset, config file and flag overrides. Run-level keys
// live in an optional [run] table.
struct RunConfig {
  ModelConfig model;
  json run = json::object();
};

RunConfig resolve_config(Options& o) {
  RunConfig rc;
  json file = json::object();
  if (!o.config.empty()) {
    file = read_config_file(o.config);
    if (!file.is_object()) throw ConfigError("config file must hold a table/object");
    if (file.contains("run")) {
      rc.run = file["run"];
      file.erase("run");
    }
  }
  static const std::set<std::string> run_keys{"preset", "corpus", "dev_corpus", "schema", "out"};
  for (auto it = rc.run.begin(); it != rc.run.end(); ++it) {
    if (!run_keys.count(it.key())) throw ConfigError("unknown [run] key '" + it.key() + "'");
  }
  const std::string preset = rc.run.value("preset", o.preset);
  ModelConfig base;
  if (preset == "desk") {
    base = ModelConfig::desk();
  } else if (preset != "paper") {
    throw ConfigError("unknown preset '" + preset + "' (desk|paper)");
  }
  rc.model = ModelConfig::from_json(file, base);
  // flags beat the file
  if (o.corpus.empty()) o.corpus = rc.run.value("corpus", "");
  if (o.dev_corpus.empty()) o.dev_corpus = rc.run.value("dev_corpus", "");
  if (o.schema.empty()) o.schema = rc.run.value("schema", "");
  if (o.out.empty()) o.out = rc.run.value("out", "");
  if (o.seed) rc.model.seed = *o.seed;
  if (o.variant) rc.model.variant = parse_variant(*o.variant);
  if (o.epochs) rc.model.epochs = *o.epochs;
  if (o.two_stage) rc.model.two_stage = true;
  if (o.ensemble > 0) rc.model.ensemble_size = o.ensemble;
  rc.model.validate();
  if (rc.model.two_stage && rc.model.ensemble_size > 1) {
    throw ConfigError("two-stage training does not support ensembles");
  }
  rc.run["preset"] = preset;
  return rc;
}

// ---------------------------------------------------------------------------
// train / eval / predict

int cmd_train(Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig rc = resolve_config(o);
  const ModelConfig& cfg = rc.model;
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus corpus = load_corpus_checked(o.corpus, schema);
  std::vector<Document> train = corpus.documents, val;
  if (!o.dev_corpus.empty()) {
    val = load_corpus_checked(o.dev_corpus, schema).documents;
  } else if (cfg.val_fraction > 0.0) {
    std::tie(train, val) = split_train_val(corpus.documents, cfg.val_fraction, cfg.seed);
  }
  Corpus train_corpus{schema, train};
  const Vocabulary vocab = build_vocabulary(train_corpus, cfg.vocab_size);
  const auto names = relation_names(schema);
  spdlog::info("variant {} | {} train / {} validation docs | vocab {}", to_string(cfg.variant),
               train.size(), val.size(), vocab.size());

  OutDir out(o.out);
  TrainOptions opt;
  opt.on_epoch = [](const EpochLog& e) {
    spdlog::info("epoch {:>3}  loss {:.4f}  val macro-F1 {:.2f}  ({:.1f}s)", e.epoch, e.train_loss,
                 e.val_macro_f1, e.seconds);
  };
  json log = json::object();
  std::vector<std::string> ckpts;
  if (cfg.two_stage) {
    TwoStageModel ts = make_two_stage(cfg, names, vocab);
    const auto r = train_two_stage(ts, train, val, opt);
    ts.detector.save(out.file("detector.ckpt").string());
    ts.typer.save(out.file("typer.ckpt").string());
    ckpts = {"detector.ckpt", "typer.ckpt"};
    log["detection"] = r.detection.to_json();
    log["typing"] = r.typing.to_json();
  } else {
    json members = json::array();
    for (std::size_t k = 0; k < cfg.ensemble_size; ++k) {
      ModelConfig mc = cfg;
      mc.seed = cfg.seed + k;
      Model m(mc, names, vocab);
      spdlog::info("member {} of {}: {} parameters", k + 1, cfg.ensemble_size, m.params().num_scalars());
      const auto r = train_model(m, train, val, opt);
      const std::string name =
          cfg.ensemble_size == 1 ? "model.ckpt" : "model-" + std::to_string(k) + ".ckpt";
      m.save(out.file(name).string());
      ckpts.push_back(name);
      members.push_back(r.to_json());
    }
    log["members"] = members;
  }
  write_json(out.file("train_log.json"), log);
  write_json(out.file("config.json"), cfg.to_json());
  write_json(out.file("run.json"),
             {{"command", "train"},
              {"config", cfg.to_json()},
              {"run", rc.run},
              {"seed", cfg.seed},
              {"corpus", o.corpus},
              {"schema", o.schema.empty() ? "builtin:ace2005" : o.schema},
              {"two_stage", cfg.two_stage},
              {"checkpoints", ckpts},
              {"started", iso_time()},
              {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  out.commit();
  spdlog::info("wrote {}", out.final_path().string());
  return 0;
}

// Trained predictor: an ensemble of one or more models, or a two-stage pair.
struct Predictor {
  std::vector<Model> members;
  std::optional<TwoStageModel> two_stage;

  const std::vector<std::string>& relation_names() const {
    return two_stage ? two_stage->typer.relation_names() : members.front().relation_names();
  }

  RelationMatrix predict(const Document& doc) const {
    if (two_stage) return predict_two_stage(*two_stage, doc);
    std::vector<const Model*> ptrs;
    for (const auto& m : members) ptrs.push_back(&m);
    return predict_ensemble(ptrs, doc).labels;
  }
};

Predictor load_predictor(const std::vector<std::string>& paths, std::size_t ensemble) {
  if (paths.empty()) throw UsageError("--ckpt is required");
  Predictor p;
  std::vector<fs::path> files;
  bool two_stage = false;
  for (const auto& s : paths) {
    const fs::path path(s);
    if (!fs::is_directory(path)) {
      files.push_back(path);
      continue;
    }
    std::ifstream in(path / "run.json");
    if (!in) throw IoError("'" + s + "' has no run.json");
    const json run = json::parse(in);
    two_stage = two_stage || run.value("two_stage", false);
    for (const auto& c : run.at("checkpoints")) files.push_back(path / c.get<std::string>());
  }
  if (two_stage) {
    if (files.size() != 2) throw DataError("a two-stage run must be loaded on its own");
    p.two_stage.emplace(TwoStageModel{Model::load(files[0].string()), Model::load(files[1].string())});
    if (p.two_stage->detector.task() != Task::detection || p.two_stage->typer.task() != Task::typing) {
      throw DataError("two-stage checkpoints have the wrong tasks");
    }
    return p;
  }
  if (ensemble > 0 && ensemble < files.size()) files.resize(ensemble);
  for (const auto& f : files) {
    p.members.push_back(Model::load(f.string()));
    if (p.members.back().task() != Task::relation) {
      throw DataError("'" + f.string() + "' is a stage checkpoint; load its run directory");
    }
  }
  spdlog::info("loaded {} checkpoint(s)", p.members.size());
  return p;
}

// Predictions in document order; documents are split across workers.
std::vector<RelationMatrix> predict_all(const Predictor& p, const std::vector<Document>& docs,
                                        std::size_t workers) {
  std::vector<RelationMatrix> out(docs.size());
  workers = std::max<std::size_t>(1, std::min(workers, docs.size()));
  if (workers == 1) {
    for (std::size_t d = 0; d < docs.size(); ++d) out[d] = p.predict(docs[d]);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t d = w; d < docs.size(); d += workers) out[d] = p.predict(docs[d]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void warn_if_all_negative(const std::vector<RelationMatrix>& pred, const Predictor& p) {
  if (!p.two_stage) return;
  for (const auto& m : pred) {
    if (m.count_positive() > 0) return;
  }
  spdlog::warn("the detection stage labelled every cell negative; all predictions are NO_RELATION");
}

int cmd_eval(Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus corpus = load_corpus_checked(o.corpus, schema);
  const Predictor p = load_predictor(o.ckpts, o.ensemble);
  if (p.relation_names() != relation_names(schema)) {
    throw DataError("checkpoint relation types do not match the schema");
  }
  const auto pred = predict_all(p, corpus.documents, o.workers);
  warn_if_all_negative(pred, p);
  const auto gold = gold_matrices(corpus);
  json report = score(pred, gold, relation_names(schema)).to_json();
  if (o.min_relations > 0) {
    report["subset"] = subset_f1(pred, gold, relation_names(schema), o.min_relations).to_json();
    report["subset"]["min_relations"] = o.min_relations;
  }
  std::cout << report.dump(2) << std::endl;
  if (!o.out.empty()) {
    OutDir out(o.out);
    write_json(out.file("metrics.json"), report);
    write_json(out.file("run.json"),
               {{"command", "eval"}, {"checkpoints", o.ckpts}, {"corpus", o.corpus},
                {"started", iso_time()},
                {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
    out.commit();
  }
  return 0;
}

int cmd_predict(Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const TypeSchema schema = load_schema_or_default(o.schema);
  Corpus corpus = load_corpus_checked(o.corpus, schema);
  const Predictor p = load_predictor(o.ckpts, o.ensemble);
  if (p.relation_names() != relation_names(schema)) {
    throw DataError("checkpoint relation types do not match the schema");
  }
  const auto pred = predict_all(p, corpus.documents, o.workers);
  warn_if_all_negative(pred, p);
  for (std::size_t d = 0; d < pred.size(); ++d) corpus.documents[d].gold = pred[d];
  OutDir out(o.out);
  save_corpus(out.file("predictions.jsonl").string(), corpus);
  write_json(out.file("run.json"),
             {{"command", "predict"}, {"checkpoints", o.ckpts}, {"corpus", o.corpus},
              {"documents", corpus.size()}, {"started", iso_time()},
              {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  out.commit();
  spdlog::info("wrote {}", (out.final_path() / "predictions.jsonl").string());
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

Granularity parse_granularity(const std::string& s) {
  if (s == "role") return Granularity::role;
  if (s == "relation") return Granularity::relation;
  throw UsageError("unknown granularity '" + s + "' (role|relation)");
}

int cmd_rules(const Options& o) {
  const TypeSchema schema = load_schema_or_default(o.schema);
  const bool merged = !o.no_merge;
  const auto rules = derive_incompatibility_rules(schema, merged);
  if (o.as_json) {
    json arr = json::array();
    for (const auto& [a, b] : rules) {
      arr.push_back({role_name(schema, a, merged), role_name(schema, b, merged)});
    }
    std::cout << json{{"merge_symmetric", merged}, {"rules", arr}}.dump(2) << std::endl;
  } else {
    for (const auto& [a, b] : rules) {
      std::cout << role_name(schema, a, merged) << "\t" << role_name(schema, b, merged) << "\n";
    }
  }
  spdlog::info("{} incompatibility rules ({} symmetric roles)", rules.size(),
               merged ? "merged" : "separate");
  return 0;
}

int cmd_invalid(const Options& o) {
  const TypeSchema schema = load_schema_or_default(o.schema);
  const std::size_t distinct_roles = schema_roles(schema, true).size();
  json rows = json::array();
  if (!o.as_json) std::cout << "k\tdistinct_roles_merged\tmultiset_all_roles\n";
  for (std::size_t k = 1; k <= o.k_max; ++k) {
    const auto multi = invalid_fraction(schema, k, CombinationConvention::multiset_all_roles);
    std::optional<InvalidFraction> merged;
    if (k <= distinct_roles) {
      merged = invalid_fraction(schema, k, CombinationConvention::distinct_roles_merged);
    }
    json row = {{"k", k},
                {"multiset_all_roles",
                 {{"invalid", multi.invalid}, {"total", multi.total}, {"percent", multi.percent()}}}};
    if (merged) {
      row["distinct_roles_merged"] = {
          {"invalid", merged->invalid}, {"total", merged->total}, {"percent", merged->percent()}};
    }
    rows.push_back(row);
    if (!o.as_json) {
      std::cout << k << "\t" << (merged ? fmt::format("{:.1f}", merged->percent()) : "-") << "\t"
                << fmt::format("{:.1f}", multi.percent()) << "\n";
    }
  }
  if (o.as_json) std::cout << rows.dump(2) << std::endl;
  return 0;
}

int cmd_cond(const Options& o) {
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus corpus = load_corpus_checked(o.corpus, schema);
  const auto cm = conditional_matrix(corpus, parse_granularity(o.granularity));
  std::cout << cm.to_json().dump(2) << std::endl;
  return 0;
}

int cmd_counts(const Options& o) {
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus corpus = load_corpus_checked(o.corpus, schema);
  std::cout << count_correlation(corpus).to_json().dump(2) << std::endl;
  return 0;
}

int cmd_js(const Options& o) {
  if (o.pred.empty() || o.gold.empty()) throw UsageError("--pred and --gold are required");
  const TypeSchema schema = load_schema_or_default(o.schema);
  const auto g = parse_granularity(o.granularity);
  const auto pred = conditional_matrix(load_corpus_checked(o.pred, schema), g);
  const auto gold = conditional_matrix(load_corpus_checked(o.gold, schema), g);
  const auto r = js_distance(pred, gold);
  json per_row = json::array();
  for (double v : r.per_row) per_row.push_back(std::isnan(v) ? json(nullptr) : json(v));
  std::cout << json{{"mean", r.mean}, {"rows_used", r.rows_used},
                    {"rows_excluded", r.rows_excluded}, {"labels", gold.labels},
                    {"per_row", per_row}}.dump(2)
            << std::endl;
  return 0;
}

int cmd_score(const Options& o) {
  if (o.pred.empty() || o.gold.empty()) throw UsageError("--pred and --gold are required");
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus pred = load_corpus_checked(o.pred, schema);
  const Corpus gold = load_corpus_checked(o.gold, schema);
  for (std::size_t d = 0; d < std::min(pred.size(), gold.size()); ++d) {
    if (pred.documents[d].doc_id != gold.documents[d].doc_id) {
      throw DataError("document " + std::to_string(d) + " differs: '" + pred.documents[d].doc_id +
                      "' vs '" + gold.documents[d].doc_id + "'");
    }
  }
  const auto names = relation_names(schema);
  const auto rep = o.min_relations > 0
                       ? subset_f1(gold_matrices(pred), gold_matrices(gold), names, o.min_relations)
                       : score(gold_matrices(pred), gold_matrices(gold), names);
  std::cout << rep.to_json().dump(2) << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// synth / export-heatmap

int cmd_synth(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required");
  const TypeSchema schema = load_schema_or_default(o.schema);
  SynthConfig sc;
  sc.num_docs = o.docs;
  sc.type_cue_rate = o.cue_rate;
  sc.relation_density = o.density;
  sc.max_entities = o.max_entities;
  sc.min_entities = std::min(sc.min_entities, sc.max_entities);
  for (const auto& spec : o.correlate) {
    // A:B:rho
    const auto p1 = spec.find(':'), p2 = spec.rfind(':');
    if (p1 == std::string::npos || p1 == p2) throw UsageError("--correlate expects A:B:rho");
    sc.count_correlations.push_back(
        {spec.substr(0, p1), spec.substr(p1 + 1, p2 - p1 - 1), std::stod(spec.substr(p2 + 1))});
  }
  const Corpus c = generate_synthetic(schema, sc, o.seed.value_or(1));
  save_corpus(o.out, c);
  spdlog::info("wrote {} documents to {}", c.size(), o.out);
  return 0;
}

int cmd_heatmap(const Options& o) {
  if (o.out.empty()) throw UsageError("--out is required (file prefix)");
  const TypeSchema schema = load_schema_or_default(o.schema);
  const Corpus corpus = load_corpus_checked(o.corpus, schema);
  Matrix m;
  std::vector<std::string> labels;
  if (o.kind == "cond") {
    const auto cm = conditional_matrix(corpus, parse_granularity(o.granularity));
    m = cm.display;
    labels = cm.labels;
  } else if (o.kind == "counts") {
    const auto cc = count_correlation(corpus);
    m = cc.r;
    labels = cc.labels;
  } else {
    throw UsageError("unknown heatmap kind '" + o.kind + "' (cond|counts)");
  }
  write_text_file(o.out + ".csv", heatmap_csv(m, labels));
  write_text_file(o.out + ".svg", heatmap_svg(m, labels));
  spdlog::info("wrote {}.csv and {}.svg", o.out, o.out);
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("relmat");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("ROR_LOG")) {
    const auto l = spdlog::level::from_str(lvl);
    // from_str maps unknown names to "off"
    if (l == spdlog::level::off && std::string(lvl) != "off") {
      spdlog::warn("ROR_LOG='{}' is not a log level; using info", lvl);
    } else {
      spdlog::set_level(l);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options o;
  CLI::App app{"relmat: joint multi-relation extraction and relation statistics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "relmat 0.1.0");

  auto add_common = [&](CLI::App* c) {
    c->add_option("--schema", o.schema, "schema JSON (default: built-in ACE schema)");
    c->add_option("--corpus", o.corpus, "corpus JSONL");
  };
  auto add_model_flags = [&](CLI::App* c) {
    c->add_option("--config", o.config, "TOML or JSON config");
    c->add_option("--preset", o.preset, "base dimensions before the config file (desk|paper)");
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--variant", o.variant, "base|bi_only|multi_only|full");
    c->add_option("--epochs", o.epochs, "training epochs");
    c->add_flag("--two-stage", o.two_stage, "detection then typing");
    c->add_option("--ensemble", o.ensemble, "number of ensemble members");
  };
  auto add_ckpt = [&](CLI::App* c) {
    c->add_option("--ckpt", o.ckpts, "checkpoint file or train output directory (repeatable)");
    c->add_option("--ensemble", o.ensemble, "use only the first N members");
    c->add_option("--workers", o.workers, "threads for prediction")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  add_model_flags(train);
  train->add_option("--dev", o.dev_corpus, "validation corpus (default: split from --corpus)");
  train->add_option("--out", o.out, "output directory");

  auto* eval = app.add_subcommand("eval", "score a trained model on a corpus");
  add_common(eval);
  add_ckpt(eval);
  eval->add_option("--min-relations", o.min_relations, "also report F1 on busy entities");
  eval->add_option("--out", o.out, "output directory for metrics.json");

  auto* predict = app.add_subcommand("predict", "write predicted relations as corpus JSONL");
  add_common(predict);
  add_ckpt(predict);
  predict->add_option("--out", o.out, "output directory");

  auto* analyze = app.add_subcommand("analyze", "relation-of-relation statistics");
  analyze->require_subcommand(1);
  auto* rules = analyze->add_subcommand("rules", "role pairs no entity type can satisfy");
  rules->add_option("--schema", o.schema, "schema JSON");
  rules->add_flag("--no-merge", o.no_merge, "keep both roles of symmetric relations");
  rules->add_flag("--json", o.as_json, "JSON output");
  auto* invalid = analyze->add_subcommand("invalid", "share of unsatisfiable role combinations");
  invalid->add_option("--schema", o.schema, "schema JSON");
  invalid->add_option("--k-max", o.k_max, "largest combination size")->check(CLI::PositiveNumber);
  invalid->add_flag("--json", o.as_json, "JSON output");
  auto* cond = analyze->add_subcommand("cond", "conditional role co-occurrence matrix");
  add_common(cond);
  cond->add_option("--granularity", o.granularity, "role|relation");
  auto* counts = analyze->add_subcommand("counts", "correlation of per-document relation counts");
  add_common(counts);
  auto* js = analyze->add_subcommand("js", "JS distance between predicted and gold co-occurrence");
  js->add_option("--schema", o.schema, "schema JSON");
  js->add_option("--pred", o.pred, "predicted corpus JSONL");
  js->add_option("--gold", o.gold, "gold corpus JSONL");
  js->add_option("--granularity", o.granularity, "role|relation");
  auto* sc = analyze->add_subcommand("score", "F1 of a prediction file against gold");
  sc->add_option("--schema", o.schema, "schema JSON");
  sc->add_option("--pred", o.pred, "predicted corpus JSONL");
  sc->add_option("--gold", o.gold, "gold corpus JSONL");
  sc->add_option("--min-relations", o.min_relations, "restrict to busy entities");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--schema", o.schema, "schema JSON");
  synth->add_option("--docs", o.docs, "number of documents");
  synth->add_option("--seed", o.seed, "random seed");
  synth->add_option("--cue-rate", o.cue_rate, "probability a link token names its relation");
  synth->add_option("--density", o.density, "mean instances per relation type per document");
  synth->add_option("--max-entities", o.max_entities, "entities per document, at most");
  synth->add_option("--correlate", o.correlate, "planted count correlation A:B:rho (repeatable)");
  synth->add_option("--out", o.out, "output JSONL");

  auto* heat = app.add_subcommand("export-heatmap", "write CSV and SVG heatmaps");
  add_common(heat);
  heat->add_option("--kind", o.kind, "cond|counts");
  heat->add_option("--granularity", o.granularity, "role|relation");
  heat->add_option("--out", o.out, "output file prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (eval->parsed()) return cmd_eval(o);
    if (predict->parsed()) return cmd_predict(o);
    if (synth->parsed()) return cmd_synth(o);
    if (heat->parsed()) return cmd_heatmap(o);
    if (rules->parsed()) return cmd_rules(o);
    if (invalid->parsed()) return cmd_invalid(o);
    if (cond->parsed()) return cmd_cond(o);
    if (counts->parsed()) return cmd_counts(o);
    if (js->parsed()) return cmd_js(o);
    if (sc->parsed()) return cmd_score(o);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitUsage;
  } catch (const DivergenceError& e) {
    spdlog::error("training diverged: {}", e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
