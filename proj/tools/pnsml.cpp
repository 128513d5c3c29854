// pnsml: command-line front end for the PNS-bound pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 resource error. Progress goes to stderr; stdout carries data only.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <thread>

#include "pnsml/pnsml.hpp"

namespace fs = std::filesystem;
namespace pl = pnsml::pipeline;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitResource = 3;

std::string fmt12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void print_scm(const pnsml::ScmSpec& s) {
  std::cout << "n_features = " << s.n_features << "\n"
            << "n_observed = " << s.n_observed << "\n"
            << "c_y = " << fmt12(s.c_y) << "\n"
            << "p_ux = " << fmt12(s.p_ux) << "\n"
            << "p_uy = " << fmt12(s.p_uy) << "\n"
            << "f_y upper branch = " << (s.upper_branch == pnsml::UpperBranch::one ? 1 : 0) << "\n"
            << "generator = " << s.generator_version << (s.seed ? " (seed " + std::to_string(*s.seed) + ")" : "")
            << "\n\n"
            << "feature  observed  mx_coeff          my_coeff          pz\n";
  for (int i = 0; i < s.n_features; ++i) {
    const auto k = static_cast<std::size_t>(i);
    char line[128];
    std::snprintf(line, sizeof line, "Z%-7d %-9s %-17s %-17s %s\n", i + 1, i < s.n_observed ? "yes" : "no",
                  fmt12(s.mx_coeffs[k]).c_str(), fmt12(s.my_coeffs[k]).c_str(), fmt12(s.pz[k]).c_str());
    std::cout << line;
  }
}

void print_informer_summary(const pnsml::InformerTable& t) {
  double lo_lb = 1, hi_lb = 0, lo_ub = 1, hi_ub = 0;
  pnsml::CompensatedSum lb, ub, pns;
  for (const auto& r : t.rows) {
    lb.add(r.bounds.lb);
    ub.add(r.bounds.ub);
    pns.add(r.dist.pns);
    lo_lb = std::min(lo_lb, r.bounds.lb);
    hi_lb = std::max(hi_lb, r.bounds.lb);
    lo_ub = std::min(lo_ub, r.bounds.ub);
    hi_ub = std::max(hi_ub, r.bounds.ub);
  }
  const double n = static_cast<double>(t.rows.size());
  std::cout << "rows = " << t.rows.size() << "\n"
            << "lb: mean " << fmt12(lb.value() / n) << ", min " << fmt12(lo_lb) << ", max " << fmt12(hi_lb) << "\n"
            << "ub: mean " << fmt12(ub.value() / n) << ", min " << fmt12(lo_ub) << ", max " << fmt12(hi_ub) << "\n"
            << "pns: mean " << fmt12(pns.value() / n) << "\n";
}

// Reads feature rows from any CSV whose header has z1..zn columns.
Eigen::MatrixXd read_feature_csv(const fs::path& p, int n_features) {
  const auto text = pnsml::io::read_file(p);
  const auto ls = pnsml::io::lines(text);
  if (ls.empty()) throw pnsml::ValidationError("feature CSV is empty");
  const auto header = pnsml::io::split(ls[0]);
  std::vector<std::size_t> cols;
  for (int i = 1; i <= n_features; ++i) {
    const auto name = "z" + std::to_string(i);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw pnsml::ValidationError("feature CSV lacks column " + name);
    cols.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  Eigen::MatrixXd x(n_features, static_cast<Eigen::Index>(ls.size() - 1));
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const auto f = pnsml::io::split(ls[r]);
    for (int i = 0; i < n_features; ++i) {
      const auto c = cols[static_cast<std::size_t>(i)];
      if (c >= f.size()) throw pnsml::ValidationError("short row in feature CSV");
      const auto v = pnsml::io::parse_int<int>(f[c]);
      if (v != 0 && v != 1) throw pnsml::ValidationError("features must be 0 or 1");
      x(i, static_cast<Eigen::Index>(r - 1)) = v;
    }
  }
  return x;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimate probability-of-necessity-and-sufficiency bounds with simulated data and learned models"};
  app.require_subcommand(1);
  bool quiet = false;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::string out_root;
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");
  app.add_option("--workers", workers, "Maximum worker threads (never changes results)")->check(CLI::Range(1u, 64u));
  app.add_option("--out", out_root, std::string("Output root (default: $") + pl::kOutputEnv + " or ./pnsml-out)");

  // scm gen | show
  auto* scm = app.add_subcommand("scm", "Create or inspect an SCM spec");
  scm->require_subcommand(1);
  auto* gen = scm->add_subcommand("gen", "Write an SCM spec (published constants or random)");
  bool gen_paper = false, gen_flip = false;
  std::optional<std::uint64_t> gen_seed;
  int gen_features = 20, gen_observed = 15;
  std::string gen_out;
  auto* paper_flag = gen->add_flag("--paper", gen_paper, "Use the published 20-feature model");
  gen->add_option("--seed", gen_seed, "Draw a random model from this seed")->excludes(paper_flag);
  gen->add_option("--n-features", gen_features, "Features in a random model")->check(CLI::Range(1, 64));
  gen->add_option("--n-observed", gen_observed, "Observed features in a random model")->check(CLI::Range(1, 26));
  gen->add_flag("--fy-upper-zero", gen_flip, "Make f_Y return 0 on (1,2) instead of 1");
  gen->add_option("-o,--output", gen_out, "Spec file (default <out>/scm.json)");
  auto* show = scm->add_subcommand("show", "Print a spec's coefficients and exogenous parameters");
  std::string show_path;
  show->add_option("spec", show_path, "Spec file")->required();

  // informer
  auto* informer = app.add_subcommand("informer", "Compute exact per-subpopulation distributions and PNS bounds");
  std::string inf_spec, inf_out;
  informer->add_option("spec", inf_spec, "Spec file")->required()->check(CLI::ExistingFile);
  informer->add_option("-o,--output", inf_out, "Informer CSV (default <out>/informer.csv)");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw experimental and observational samples into per-key counters");
  std::string smp_spec, smp_out;
  std::uint64_t n_exp = 50'000'000, n_obs = 50'000'000, smp_seed = 1;
  sample->add_option("spec", smp_spec, "Spec file")->required()->check(CLI::ExistingFile);
  sample->add_option("--n-exp", n_exp, "Experimental samples")->capture_default_str();
  sample->add_option("--n-obs", n_obs, "Observational samples")->capture_default_str();
  sample->add_option("--seed", smp_seed, "Sampling seed")->capture_default_str();
  sample->add_option("-o,--output", smp_out, "Counter CSV (default <out>/counters.csv)");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "Filter counters by sample count and label bounds");
  std::string ds_counters, ds_out;
  std::uint64_t threshold = pnsml::kDefaultThreshold;
  dataset->add_option("counters", ds_counters, "Counter CSV from `sample`")->required()->check(CLI::ExistingFile);
  dataset->add_option("--threshold", threshold, "Minimum samples per regime")->capture_default_str()->check(CLI::PositiveNumber);
  dataset->add_option("-o,--output", ds_out, "Dataset CSV (default <out>/dataset.csv)");

  // train
  auto* train = app.add_subcommand("train", "Train one regressor on one bound");
  std::string tr_dataset, tr_model = "mlp", tr_activation = "mish", tr_label = "lb", tr_config, tr_out;
  std::uint64_t tr_seed = 1;
  std::optional<int> tr_epochs;
  std::optional<double> tr_lr;
  std::optional<std::size_t> tr_batch;
  bool tr_no_tune = false;
  train->add_option("dataset", tr_dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--model", tr_model, "mlp, rf or gbdt")->check(CLI::IsMember({"mlp", "rf", "gbdt"}))->capture_default_str();
  train->add_option("--activation", tr_activation, "MLP hidden activation")
      ->check(CLI::IsMember({"mish", "relu", "leaky_relu"}))
      ->capture_default_str();
  train->add_option("--label", tr_label, "Bound to learn")->check(CLI::IsMember({"lb", "ub"}))->capture_default_str();
  train->add_option("--seed", tr_seed, "Training seed")->capture_default_str();
  train->add_option("--epochs", tr_epochs, "MLP epochs (default 1000)");
  train->add_option("--lr", tr_lr, "MLP learning rate (default 0.01)");
  train->add_option("--batch-size", tr_batch, "MLP minibatch size (default full batch)");
  train->add_flag("--no-tune", tr_no_tune, "Skip hyperparameter search for rf/gbdt");
  train->add_option("--config", tr_config, "Run-config JSON supplying mlp/rf/gbdt/tune sections")->check(CLI::ExistingFile);
  train->add_option("-o,--output", tr_out, "Model file (default <out>/models/<model>_<label>.json)");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict bounds with a trained model");
  std::string pr_model, pr_input, pr_out;
  predict->add_option("model", pr_model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--input", pr_input, "CSV with z1..zn columns (default: every subpopulation)")->check(CLI::ExistingFile);
  predict->add_option("-o,--output", pr_out, "Prediction CSV (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "Score models against the informer table and write the report");
  std::string ev_informer, ev_dataset, ev_out;
  std::vector<std::string> ev_models;
  int bins = 10;
  bool no_svg = false;
  eval->add_option("--informer", ev_informer, "Informer CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", ev_models, "Model file (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", ev_dataset, "Training dataset, for train-set metrics")->check(CLI::ExistingFile);
  eval->add_option("--bins", bins, "Bins per axis in the binned matrices")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_flag("--no-svg", no_svg, "Skip SVG scatter plots");
  eval->add_option("-o,--output", ev_out, "Report directory (default <out>/report)");

  // reproduce
  auto* repro = app.add_subcommand("reproduce", "Run every stage end to end");
  bool desk = false;
  std::optional<std::uint64_t> rp_seed;
  std::string rp_config;
  repro->add_flag("--desk-scale", desk, "2e6 samples per regime, threshold 400");
  repro->add_option("--seed", rp_seed, "Master seed (default 1)");
  repro->add_option("--config", rp_config, "Run-config JSON; flags override it")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const pl::Logger log(quiet);
  const auto root = pl::output_root(out_root);
  try {
    if (gen->parsed()) {
      if (!gen_paper && !gen_seed) throw CLI::ValidationError("scm gen needs --paper or --seed");
      if (gen_observed > gen_features) throw CLI::ValidationError("--n-observed exceeds --n-features");
      auto spec = gen_paper ? pnsml::paper_scm()
                            : pnsml::random_scm(*gen_seed, {-1.0, 1.0}, {0.0, 1.0}, gen_features, gen_observed);
      if (gen_flip) spec.upper_branch = pnsml::UpperBranch::zero;
      const fs::path out = gen_out.empty() ? root / "scm.json" : fs::path(gen_out);
      pl::write_scm(spec, out);
      log("scm", "wrote " + out.string());
    } else if (show->parsed()) {
      print_scm(pl::load_scm(show_path));
    } else if (informer->parsed()) {
      const fs::path out = inf_out.empty() ? root / "informer.csv" : fs::path(inf_out);
      print_informer_summary(pl::stage_informer(inf_spec, out, workers, log));
    } else if (sample->parsed()) {
      const fs::path out = smp_out.empty() ? root / "counters.csv" : fs::path(smp_out);
      pl::stage_sample(smp_spec, n_exp, n_obs, smp_seed, out, workers, log);
    } else if (dataset->parsed()) {
      const fs::path out = ds_out.empty() ? root / "dataset.csv" : fs::path(ds_out);
      const auto d = pl::stage_dataset(ds_counters, threshold, out, log);
      std::cout << "records = " << d.size() << "\n";
    } else if (train->parsed()) {
      pl::RunConfig cfg;
      if (!tr_config.empty()) cfg = pl::run_config_from_json(json::parse(pnsml::io::read_file(tr_config)));
      if (tr_epochs) cfg.mlp.epochs = *tr_epochs;
      if (tr_lr) cfg.mlp.learning_rate = *tr_lr;
      if (tr_batch) cfg.mlp.batch_size = *tr_batch;
      if (tr_no_tune) cfg.tune.enabled = false;
      cfg.validate();
      const auto spec = pl::model_spec(tr_model == "mlp" ? "mlp_" + tr_activation : tr_model);
      const auto label = pnsml::label_from_string(tr_label);
      const fs::path out = tr_out.empty() ? root / "models" / (spec.slug + "_" + tr_label + ".json") : fs::path(tr_out);
      pl::stage_train(tr_dataset, spec, label, cfg, tr_seed, out, workers, log);
    } else if (predict->parsed()) {
      const auto model = pl::load_model(pr_model);
      const int n = model.n_inputs() > 0 ? model.n_inputs() : 15;
      Eigen::MatrixXd x;
      std::vector<std::string> ids;
      if (pr_input.empty()) {
        if (n > 26) throw pnsml::ResourceError("too many features to enumerate every subpopulation");
        const std::uint32_t count = 1U << n;
        x.resize(n, count);
        for (std::uint32_t k = 0; k < count; ++k) {
          x.col(k) = pnsml::key_features(pnsml::SubpopKey{k}, n);
          ids.push_back(std::to_string(k));
        }
      } else {
        x = read_feature_csv(pr_input, n);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          std::uint32_t k = 0;
          for (int i = 0; i < n; ++i) k |= static_cast<std::uint32_t>(x(i, j)) << i;
          ids.push_back(std::to_string(k));
        }
      }
      const Eigen::VectorXd p = model.predict(x);
      std::string text = "key,predicted\n";
      for (Eigen::Index j = 0; j < p.size(); ++j) text += ids[static_cast<std::size_t>(j)] + "," + pnsml::io::format_real(p[j]) + "\n";
      if (pr_out.empty()) std::cout << text;
      else pnsml::io::write_file(pr_out, text);
    } else if (eval->parsed()) {
      const fs::path out = ev_out.empty() ? root / "report" : fs::path(ev_out);
      std::vector<fs::path> models(ev_models.begin(), ev_models.end());
      std::optional<fs::path> ds;
      if (!ev_dataset.empty()) ds = ev_dataset;
      const auto evals = pl::stage_eval(ev_informer, models, ds, out, {bins, !no_svg}, workers, log);
      for (const auto& e : evals) {
        std::cout << e.name << "," << pnsml::dataset_name(e.label) << "," << pnsml::io::format_real(e.population.metrics.mse)
                  << "," << pnsml::io::format_real(e.population.metrics.mae) << "\n";
      }
    } else if (repro->parsed()) {
      pl::RunConfig cfg;
      if (desk) cfg = pl::desk_scale(cfg);
      if (!rp_config.empty()) cfg = pl::run_config_from_json(json::parse(pnsml::io::read_file(rp_config)), cfg);
      if (desk) cfg = pl::desk_scale(cfg);
      if (rp_seed) cfg.seed = *rp_seed;
      if (!out_root.empty() || cfg.out.empty()) cfg.out = root.string();
      pl::reproduce(cfg, workers, log);
      log("reproduce", "report written to " + (fs::path(cfg.out) / "report" / "comparison.csv").string());
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pnsml::ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const pnsml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kExitResource;
  }
  return 0;
}
