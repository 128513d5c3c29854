#pragma once

// Staged pipeline: SCM -> informer table -> sample counters -> dataset ->
// models -> report. Every stage writes its artifacts plus a manifest holding
// the SHA-256 of each input and output and the effective parameters; a stage
// whose manifest still matches is skipped.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnsml/datagen.hpp"
#include "pnsml/ensemble.hpp"
#include "pnsml/error.hpp"
#include "pnsml/eval.hpp"
#include "pnsml/hash.hpp"
#include "pnsml/informer.hpp"
#include "pnsml/io.hpp"
#include "pnsml/mlp.hpp"
#include "pnsml/model.hpp"
#include "pnsml/scm.hpp"
#include "pnsml/training_set.hpp"
#include "pnsml/tune.hpp"

namespace pnsml::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr std::string_view kPipelineVersion = "pnsml-pipeline/1";
inline constexpr const char* kOutputEnv = "PNSML_OUT";

/// Output root: explicit value, else $PNSML_OUT, else ./pnsml-out.
inline fs::path output_root(const std::string& explicit_out = {}) {
  if (!explicit_out.empty()) return explicit_out;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "pnsml-out";
}

class Logger {
 public:
  explicit Logger(bool quiet = false) : quiet_(quiet) {}
  void operator()(std::string_view stage, std::string_view msg) const {
    if (!quiet_) std::cerr << "[" << stage << "] " << msg << std::endl;
  }

 private:
  bool quiet_;
};

/// Stage seeds: derive_seed(master, "<stage>") with stage names "sample",
/// "train/<model>/<label>"; identical across runs and independent of which
/// stages actually execute.
inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) { return derive_seed(master, stage); }

inline fs::path manifest_path(const fs::path& artifact) {
  return artifact.parent_path() / (artifact.filename().string() + ".manifest.json");
}

/// Sidecar metadata path: counters.csv -> counters.meta.json.
inline fs::path meta_path(const fs::path& artifact) {
  return artifact.parent_path() / (artifact.stem().string() + ".meta.json");
}

/// Cache bookkeeping for one stage. Inputs and outputs are recorded by file
/// name and content hash, so manifests do not depend on where the run lives.
class StageCache {
 public:
  StageCache(std::string stage, fs::path primary, json params)
      : stage_(std::move(stage)), manifest_(manifest_path(primary)), params_(std::move(params)) {}

  StageCache& input(const fs::path& p) {
    inputs_.push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
    return *this;
  }
  StageCache& output(const fs::path& p) {
    outputs_.push_back(p);
    return *this;
  }

  /// True when a previous manifest matches these inputs and parameters and
  /// every recorded output still hashes to its recorded value.
  bool fresh(const Logger& log) const {
    if (!fs::exists(manifest_)) return false;
    json m;
    try {
      m = json::parse(io::read_file(manifest_));
    } catch (const json::exception&) {
      log(stage_, "unreadable manifest; rebuilding");
      return false;
    }
    if (m.value("stage", "") != stage_ || m.value("version", "") != kPipelineVersion ||
        m.value("params", json()) != params_ || m.value("inputs", json()) != json(inputs_)) {
      log(stage_, "inputs or parameters changed; rebuilding");
      return false;
    }
    const auto rec = m.value("outputs", json::array());
    if (rec.size() != outputs_.size()) {
      log(stage_, "manifest output list differs; rebuilding");
      return false;
    }
    for (std::size_t i = 0; i < outputs_.size(); ++i) {
      if (!fs::exists(outputs_[i])) {
        log(stage_, "missing " + outputs_[i].filename().string() + "; rebuilding");
        return false;
      }
      if (rec[i].value("sha256", "") != sha256_file(outputs_[i])) {
        log(stage_, "hash mismatch on " + outputs_[i].filename().string() + "; refusing cached copy");
        return false;
      }
    }
    log(stage_, "cached: " + manifest_.parent_path().string() + "/" + outputs_.front().filename().string());
    return true;
  }

  void commit() const {
    auto outs = json::array();
    for (const auto& p : outputs_) outs.push_back({{"file", p.filename().string()}, {"sha256", sha256_file(p)}});
    const json m = {{"stage", stage_},      {"version", kPipelineVersion}, {"params", params_},
                    {"inputs", inputs_},    {"outputs", outs}};
    io::write_file(manifest_, m.dump(2) + "\n");
  }

 private:
  std::string stage_;
  fs::path manifest_;
  json params_;
  std::vector<json> inputs_;
  std::vector<fs::path> outputs_;
};

// ---------------------------------------------------------------------------
// Models

enum class Family { mlp, rf, gbdt };

struct ModelSpec {
  std::string slug;  ///< mlp_mish, mlp_relu, mlp_leaky_relu, rf, gbdt
  std::string name;  ///< comparison-table name
  Family family = Family::mlp;
  Activation activation = Activation::mish;
};

inline ModelSpec model_spec(std::string_view slug) {
  if (slug == "mlp_mish") return {"mlp_mish", "MLP(Mish)", Family::mlp, Activation::mish};
  if (slug == "mlp_relu") return {"mlp_relu", "MLP(ReLU)", Family::mlp, Activation::relu};
  if (slug == "mlp_leaky_relu") return {"mlp_leaky_relu", "MLP(LeakyReLU)", Family::mlp, Activation::leaky_relu};
  if (slug == "rf") return {"rf", "RF", Family::rf, Activation::relu};
  if (slug == "gbdt") return {"gbdt", "GBDT", Family::gbdt, Activation::relu};
  throw ValidationError("unknown model '" + std::string(slug) + "' (mlp_mish, mlp_relu, mlp_leaky_relu, rf, gbdt)");
}

inline ModelSpec model_spec(const Regressor& r) {
  if (const auto* m = std::get_if<MlpModel>(&r.model)) {
    return model_spec("mlp_" + std::string(to_string(m->config.hidden_activation)));
  }
  return model_spec(r.kind());
}

struct TuneSettings {
  bool enabled = true;
  int budget = 8;
  int k_folds = 5;
};

struct ScmSource {
  enum class Kind { paper, random, file };
  Kind kind = Kind::paper;
  std::uint64_t seed = 0;
  std::string path;
};

struct RunConfig {
  ScmSource scm;
  std::uint64_t n_exp = 50'000'000;
  std::uint64_t n_obs = 50'000'000;
  std::uint64_t threshold = kDefaultThreshold;
  std::vector<std::string> models{"mlp_mish", "mlp_relu", "mlp_leaky_relu", "rf", "gbdt"};
  std::vector<Label> labels{Label::lb, Label::ub};
  MlpConfig mlp;
  TreeEnsembleConfig rf = default_rf_config();
  TreeEnsembleConfig gbdt = default_gbdt_config();
  TuneSettings tune;
  int bins = 10;
  bool svg = true;
  std::string out;
  std::uint64_t seed = 1;

  void validate() const {
    if (threshold < 1) throw ValidationError("threshold must be at least 1");
    if (scm.kind == ScmSource::Kind::file && !fs::exists(scm.path)) {
      throw ValidationError("SCM file " + scm.path + " does not exist");
    }
    for (const auto& m : models) model_spec(m);
    if (labels.empty()) throw ValidationError("at least one label is required");
    mlp.validate();
    rf.validate();
    gbdt.validate();
    if (tune.enabled && (tune.budget < 1 || tune.k_folds < 2)) throw ValidationError("tuning needs budget >= 1, k_folds >= 2");
    if (bins < 1) throw ValidationError("bins must be at least 1");
  }
};

/// 2e6 samples per regime, threshold 400.
inline RunConfig desk_scale(RunConfig c) {
  c.n_exp = 2'000'000;
  c.n_obs = 2'000'000;
  c.threshold = 400;
  return c;
}

inline json to_json(const ScmSource& s) {
  switch (s.kind) {
    case ScmSource::Kind::paper: return {{"source", "paper"}};
    case ScmSource::Kind::random: return {{"source", "random"}, {"seed", s.seed}};
    default: return {{"source", "file"}, {"path", s.path}};
  }
}

inline json to_json(const RunConfig& c) {
  std::vector<std::string> labels;
  for (auto l : c.labels) labels.emplace_back(to_string(l));
  auto mlp = pnsml::to_json(c.mlp);
  mlp.erase("seed");
  mlp.erase("hidden_activation");
  auto rf = pnsml::to_json(c.rf), gbdt = pnsml::to_json(c.gbdt);
  for (auto* j : {&rf, &gbdt}) {
    j->erase("seed");
    j->erase("kind");
  }
  return {{"scm", to_json(c.scm)},
          {"n_exp", c.n_exp},
          {"n_obs", c.n_obs},
          {"threshold", c.threshold},
          {"models", c.models},
          {"labels", labels},
          {"mlp", mlp},
          {"rf", rf},
          {"gbdt", gbdt},
          {"tune", {{"enabled", c.tune.enabled}, {"budget", c.tune.budget}, {"k_folds", c.tune.k_folds}}},
          {"bins", c.bins},
          {"svg", c.svg},
          {"seed", c.seed}};
}

/// Applies the fields present in `j` on top of `base`; unknown keys are
/// rejected so typos do not silently fall back to defaults.
inline RunConfig run_config_from_json(const json& j, RunConfig base = {}) {
  static const std::vector<std::string> known{"scm",    "n_exp", "n_obs", "threshold", "models", "labels", "mlp",
                                              "rf",     "gbdt",  "tune",  "bins",      "svg",    "seed",   "out"};
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ValidationError("unknown run config key '" + k + "'");
  }
  auto c = std::move(base);
  try {
    if (j.contains("scm")) {
      const auto& s = j["scm"];
      const auto src = s.at("source").get<std::string>();
      if (src == "paper") c.scm = {ScmSource::Kind::paper, 0, {}};
      else if (src == "random") c.scm = {ScmSource::Kind::random, s.at("seed").get<std::uint64_t>(), {}};
      else if (src == "file") c.scm = {ScmSource::Kind::file, 0, s.at("path").get<std::string>()};
      else throw ValidationError("scm.source must be paper, random or file");
    }
    c.n_exp = j.value("n_exp", c.n_exp);
    c.n_obs = j.value("n_obs", c.n_obs);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("models")) c.models = j["models"].get<std::vector<std::string>>();
    if (j.contains("labels")) {
      c.labels.clear();
      for (const auto& l : j["labels"]) c.labels.push_back(label_from_string(l.get<std::string>()));
    }
    if (j.contains("mlp")) {
      auto m = pnsml::to_json(c.mlp);
      m.update(j["mlp"]);
      c.mlp = mlp_config_from_json(m);
    }
    if (j.contains("rf")) {
      auto m = pnsml::to_json(c.rf);
      m.update(j["rf"]);
      m["kind"] = "rf";
      c.rf = ensemble_config_from_json(m);
    }
    if (j.contains("gbdt")) {
      auto m = pnsml::to_json(c.gbdt);
      m.update(j["gbdt"]);
      m["kind"] = "gbdt";
      c.gbdt = ensemble_config_from_json(m);
    }
    if (j.contains("tune")) {
      const auto& t = j["tune"];
      c.tune.enabled = t.value("enabled", c.tune.enabled);
      c.tune.budget = t.value("budget", c.tune.budget);
      c.tune.k_folds = t.value("k_folds", c.tune.k_folds);
    }
    c.bins = j.value("bins", c.bins);
    c.svg = j.value("svg", c.svg);
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed run config: ") + e.what());
  }
  return c;
}

struct TrainedModel {
  Regressor regressor;
  TrainReport report;
  std::optional<TuneResult> tuning;
};

/// Hyperparameters used when training `spec`: the run's MLP config with the
/// model's activation and an input layer sized to the data, or the run's
/// forest/boosting config.
inline json effective_model_config(const ModelSpec& spec, const RunConfig& cfg, std::uint64_t seed, int n_inputs) {
  if (spec.family == Family::mlp) {
    auto m = cfg.mlp;
    m.hidden_activation = spec.activation;
    m.layer_sizes.front() = n_inputs;
    m.seed = seed;
    return pnsml::to_json(m);
  }
  auto e = spec.family == Family::rf ? cfg.rf : cfg.gbdt;
  e.seed = seed;
  return pnsml::to_json(e);
}

inline TrainedModel train_model(const ModelSpec& spec, const TrainingSet& data, const RunConfig& cfg,
                                std::uint64_t seed, TrainingMeta meta, unsigned workers = 1) {
  TrainedModel out;
  meta.seed = seed;
  meta.n_records = data.size();
  out.regressor.meta = meta;
  if (spec.family == Family::mlp) {
    auto [model, report] = mlp_train(data, mlp_config_from_json(effective_model_config(spec, cfg, seed, data.n_features)));
    out.regressor.model = std::move(model);
    out.report = std::move(report);
    return out;
  }
  auto config = ensemble_config_from_json(effective_model_config(spec, cfg, seed, data.n_features));
  if (cfg.tune.enabled) {
    const auto space = default_search_space(config.kind);
    out.tuning = tune(config, data, space, cfg.tune.budget, cfg.tune.k_folds, derive_seed(seed, "tune"), workers);
    config = out.tuning->best;
  }
  if (spec.family == Family::rf) {
    auto [model, report] = rf_train(data, config, workers);
    out.regressor.model = std::move(model);
    out.report = std::move(report);
  } else {
    auto [model, report] = gbdt_train(data, config);
    out.regressor.model = std::move(model);
    out.report = std::move(report);
  }
  return out;
}

/// Persisted training report: loss curve, train metrics, tuning record.
/// Wall time is logged, never stored, so reruns are byte-identical.
inline json report_json(const TrainedModel& t) {
  json j = {{"loss", t.report.loss},
            {"train_mse", t.report.train_mse},
            {"train_mae", t.report.train_mae},
            {"seed", t.report.seed},
            {"config", t.report.config}};
  if (t.tuning) j["tuning"] = pnsml::to_json(*t.tuning);
  return j;
}

// ---------------------------------------------------------------------------
// Stages. Each takes explicit paths so the CLI subcommands and `reproduce`
// share one implementation.

inline ScmSpec load_scm(const fs::path& p) {
  try {
    return scm_from_json(json::parse(io::read_file(p)));
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse SCM file " + p.string() + ": " + e.what());
  }
}

inline ScmSpec resolve_scm(const ScmSource& s) {
  switch (s.kind) {
    case ScmSource::Kind::paper: return paper_scm();
    case ScmSource::Kind::random: return random_scm(s.seed);
    default: return load_scm(s.path);
  }
}

/// Writes the spec only if its bytes would change.
inline void write_scm(const ScmSpec& spec, const fs::path& p) {
  const auto text = pnsml::to_json(spec).dump(2) + "\n";
  if (fs::exists(p) && io::read_file(p) == text) return;
  io::write_file(p, text);
}

inline InformerTable stage_informer(const fs::path& spec_path, const fs::path& out_csv, unsigned workers,
                                    const Logger& log) {
  StageCache cache("informer", out_csv, json::object());
  cache.input(spec_path).output(out_csv);
  if (cache.fresh(log)) return parse_informer_csv(io::read_file(out_csv));
  const auto spec = load_scm(spec_path);
  log("informer", "enumerating " + std::to_string(std::size_t{1} << spec.n_observed) + " subpopulations");
  auto table = enumerate_informer(spec, workers);
  io::write_file(out_csv, informer_csv(table));
  cache.commit();
  return table;
}

struct CountersMeta {
  int n_observed = 0;
  std::string spec_hash;
  std::uint64_t seed = 0;
  std::uint64_t n_exp = 0;
  std::uint64_t n_obs = 0;
};

inline SampleCounters load_counters(const fs::path& csv) {
  const auto mj = json::parse(io::read_file(meta_path(csv)));
  return parse_counters_csv(io::read_file(csv), mj.at("n_observed").get<int>(), mj.at("spec_hash").get<std::string>());
}

inline SampleCounters stage_sample(const fs::path& spec_path, std::uint64_t n_exp, std::uint64_t n_obs,
                                   std::uint64_t seed, const fs::path& out_csv, unsigned workers, const Logger& log) {
  const json params = {{"n_exp", n_exp}, {"n_obs", n_obs}, {"seed", seed}, {"prng", CounterStream::kAlgorithm},
                       {"generator_version", kDatagenVersion}};
  StageCache cache("sample", out_csv, params);
  cache.input(spec_path).output(out_csv).output(meta_path(out_csv));
  if (cache.fresh(log)) return load_counters(out_csv);
  const auto spec = load_scm(spec_path);
  const auto t0 = std::chrono::steady_clock::now();
  log("sample", "drawing " + std::to_string(n_exp) + " experimental + " + std::to_string(n_obs) +
                    " observational samples on " + std::to_string(workers) + " worker(s)");
  const auto counters = merge_counters(generate_counters(spec, n_exp, SampleRegime::experimental, seed, workers),
                                       generate_counters(spec, n_obs, SampleRegime::observational, seed, workers));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log("sample", "done in " + std::to_string(secs) + " s");
  io::write_file(out_csv, counters_csv(counters));
  const json meta = {{"n_observed", counters.n_observed}, {"spec_hash", counters.spec_hash}, {"seed", seed},
                     {"n_exp", n_exp},  {"n_obs", n_obs},  {"prng", CounterStream::kAlgorithm},
                     {"generator_version", kDatagenVersion}};
  io::write_file(meta_path(out_csv), meta.dump(2) + "\n");
  cache.commit();
  return counters;
}

inline Dataset load_dataset(const fs::path& csv) {
  auto d = parse_dataset_csv(io::read_file(csv));
  if (fs::exists(meta_path(csv))) d.meta = dataset_meta_from_json(json::parse(io::read_file(meta_path(csv))));
  return d;
}

inline Dataset stage_dataset(const fs::path& counters_path, std::uint64_t threshold, const fs::path& out_csv,
                             const Logger& log) {
  StageCache cache("dataset", out_csv, {{"threshold", threshold}});
  cache.input(counters_path).input(meta_path(counters_path)).output(out_csv).output(meta_path(out_csv));
  if (cache.fresh(log)) return load_dataset(out_csv);
  const auto counters = load_counters(counters_path);
  const auto seed = json::parse(io::read_file(meta_path(counters_path))).value("seed", std::uint64_t{0});
  auto d = build_dataset(counters, threshold, seed);
  std::size_t inconsistent = 0;
  for (const auto& r : d.records) inconsistent += r.consistent ? 0 : 1;
  log("dataset", std::to_string(d.size()) + " subpopulations pass threshold " + std::to_string(threshold) + " (" +
                     std::to_string(inconsistent) + " with crossed bounds)");
  io::write_file(out_csv, dataset_csv(d));
  io::write_file(meta_path(out_csv), pnsml::to_json(d.meta).dump(2) + "\n");
  cache.commit();
  return d;
}

inline Regressor load_model(const fs::path& p) {
  try {
    return regressor_from_json(json::parse(io::read_file(p)));
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse model file " + p.string() + ": " + e.what());
  }
}

inline fs::path report_path(const fs::path& model_path) {
  return model_path.parent_path() / (model_path.stem().string() + ".report.json");
}

/// Trains one model on one label. The manifest records the effective
/// hyperparameters (epochs, learning rate, tuning settings, ...).
inline Regressor stage_train(const fs::path& dataset_path, const ModelSpec& spec, Label label, const RunConfig& cfg,
                             std::uint64_t seed, const fs::path& out_model, unsigned workers, const Logger& log) {
  const auto dataset = load_dataset(dataset_path);
  json params = {{"model", spec.slug},
                 {"label", to_string(label)},
                 {"config", effective_model_config(spec, cfg, seed, dataset.n_observed)}};
  if (spec.family != Family::mlp) {
    params["tune"] = {{"enabled", cfg.tune.enabled}, {"budget", cfg.tune.budget}, {"k_folds", cfg.tune.k_folds}};
  }
  const std::string stage = "train " + spec.slug + "/" + std::string(to_string(label));
  StageCache cache(stage, out_model, params);
  cache.input(dataset_path).output(out_model).output(report_path(out_model));
  if (cache.fresh(log)) return load_model(out_model);
  const auto data = make_training_set(dataset, label);
  TrainingMeta meta;
  meta.dataset_hash = sha256_file(dataset_path);
  meta.label = label;
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = train_model(spec, data, cfg, seed, meta, workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log(stage, "trained on " + std::to_string(data.size()) + " records in " + std::to_string(secs) +
                 " s, train MAE " + std::to_string(trained.report.train_mae));
  io::write_file(out_model, pnsml::to_json(trained.regressor).dump() + "\n");
  io::write_file(report_path(out_model), report_json(trained).dump(2) + "\n");
  cache.commit();
  return trained.regressor;
}

/// Scores every model against the informer table (and, when a dataset is
/// given, on its training records) and writes the report files into out_dir.
inline std::vector<ModelEvaluation> stage_eval(const fs::path& informer_path, const std::vector<fs::path>& model_paths,
                                               const std::optional<fs::path>& dataset_path, const fs::path& out_dir,
                                               const ReportOptions& opt, unsigned workers, const Logger& log) {
  json params = {{"bins", opt.bins}, {"svg", opt.svg}};
  StageCache cache("eval", out_dir / "comparison.csv", params);
  cache.input(informer_path);
  if (dataset_path) cache.input(*dataset_path);
  for (const auto& m : model_paths) cache.input(m);

  std::vector<Regressor> models;
  for (const auto& m : model_paths) models.push_back(load_model(m));
  cache.output(out_dir / "comparison.csv").output(out_dir / "comparison_train.csv");
  for (const auto& r : models) {
    const auto stem = model_spec(r).slug + "_" + std::string(to_string(r.meta.label));
    cache.output(out_dir / ("matrix_" + stem + ".csv")).output(out_dir / ("scatter_" + stem + ".csv"));
    if (opt.svg) cache.output(out_dir / ("scatter_" + stem + ".svg"));
  }

  const auto table = parse_informer_csv(io::read_file(informer_path));
  std::optional<Dataset> dataset;
  if (dataset_path) dataset = load_dataset(*dataset_path);
  std::vector<ModelEvaluation> evals;
  for (const auto& r : models) {
    const auto spec = model_spec(r);
    ModelEvaluation e;
    e.name = spec.name;
    e.slug = spec.slug;
    e.label = r.meta.label;
    e.population = full_population_eval(r, table, r.meta.label, workers);
    e.population.metrics.model_name = spec.name;
    if (dataset) {
      e.train = train_set_eval(r, make_training_set(*dataset, r.meta.label));
      e.train->model_name = spec.name;
    }
    evals.push_back(std::move(e));
  }
  if (cache.fresh(log)) return evals;
  for (const auto& e : evals) {
    log("eval", e.name + " " + dataset_name(e.label) + ": MSE " + std::to_string(e.population.metrics.mse) + ", MAE " +
                    std::to_string(e.population.metrics.mae));
  }
  emit_report(evals, out_dir, opt);
  cache.commit();
  return evals;
}

/// Layout of a reproduction run under one output directory.
struct RunLayout {
  fs::path root;
  fs::path scm() const { return root / "scm.json"; }
  fs::path informer() const { return root / "informer.csv"; }
  fs::path counters() const { return root / "counters.csv"; }
  fs::path dataset() const { return root / "dataset.csv"; }
  fs::path model(const std::string& slug, Label l) const {
    return root / "models" / (slug + "_" + std::string(to_string(l)) + ".json");
  }
  fs::path report() const { return root / "report"; }
};

/// Chains every stage. Worker count affects speed only.
inline std::vector<ModelEvaluation> reproduce(const RunConfig& cfg, unsigned workers, const Logger& log) {
  cfg.validate();
  const RunLayout run{output_root(cfg.out)};
  log("reproduce", "output directory " + run.root.string() + ", master seed " + std::to_string(cfg.seed));
  io::write_file(run.root / "run_config.json", to_json(cfg).dump(2) + "\n");
  write_scm(resolve_scm(cfg.scm), run.scm());
  stage_informer(run.scm(), run.informer(), workers, log);
  stage_sample(run.scm(), cfg.n_exp, cfg.n_obs, stage_seed(cfg.seed, "sample"), run.counters(), workers, log);
  const auto dataset = stage_dataset(run.counters(), cfg.threshold, run.dataset(), log);
  if (dataset.size() == 0) throw ValidationError("no subpopulation passes the threshold; nothing to train on");
  std::vector<fs::path> model_paths;
  for (const auto& slug : cfg.models) {
    const auto spec = model_spec(slug);
    for (auto label : cfg.labels) {
      const auto seed = stage_seed(cfg.seed, "train/" + slug + "/" + std::string(to_string(label)));
      stage_train(run.dataset(), spec, label, cfg, seed, run.model(slug, label), workers, log);
      model_paths.push_back(run.model(slug, label));
    }
  }
  return stage_eval(run.informer(), model_paths, run.dataset(), run.report(), {cfg.bins, cfg.svg}, workers, log);
}

}  // namespace pnsml::pipeline
