#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pnsml/error.hpp"
#include "pnsml/mlp.hpp"
#include "pnsml/rng.hpp"
#include "pnsml/training_set.hpp"
#include "pnsml/tree.hpp"

namespace pnsml {

enum class EnsembleKind { random_forest, gbdt };

inline std::string_view to_string(EnsembleKind k) { return k == EnsembleKind::random_forest ? "rf" : "gbdt"; }

struct TreeEnsembleConfig {
  EnsembleKind kind = EnsembleKind::random_forest;
  int n_estimators = 200;
  int max_depth = 12;
  int min_samples_split = 2;
  int max_features = 4;         ///< per-split feature sample (RF); 0 means all
  double learning_rate = 0.1;   ///< shrinkage (GBDT)
  double subsample = 1.0;       ///< row fraction per round (GBDT)
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 0 || (kind == EnsembleKind::random_forest && n_estimators < 1)) {
      throw ValidationError("n_estimators must be at least 1");
    }
    if (max_depth < 0) throw ValidationError("max_depth must be non-negative");
    if (min_samples_split < 2) throw ValidationError("min_samples_split must be at least 2");
    if (max_features < 0) throw ValidationError("max_features must be non-negative");
    if (kind == EnsembleKind::gbdt) {
      if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ValidationError("shrinkage must lie in (0, 1]");
      if (!(subsample > 0.0 && subsample <= 1.0)) throw ValidationError("subsample must lie in (0, 1]");
    }
  }

  TreeParams tree_params() const { return {max_depth, min_samples_split, max_features}; }
};

/// Forest defaults: 200 trees, depth 12, ceil(sqrt(15)) = 4 features per split.
inline TreeEnsembleConfig default_rf_config(std::uint64_t seed = 0) {
  TreeEnsembleConfig c;
  c.kind = EnsembleKind::random_forest;
  c.seed = seed;
  return c;
}

/// Boosting defaults: 300 rounds of depth-3 trees, shrinkage 0.1, no subsampling.
inline TreeEnsembleConfig default_gbdt_config(std::uint64_t seed = 0) {
  TreeEnsembleConfig c;
  c.kind = EnsembleKind::gbdt;
  c.n_estimators = 300;
  c.max_depth = 3;
  c.max_features = 0;
  c.learning_rate = 0.1;
  c.subsample = 1.0;
  c.seed = seed;
  return c;
}

inline nlohmann::json to_json(const TreeEnsembleConfig& c) {
  nlohmann::json j = {{"kind", std::string(to_string(c.kind))},
                      {"n_estimators", c.n_estimators},
                      {"max_depth", c.max_depth},
                      {"min_samples_split", c.min_samples_split},
                      {"max_features", c.max_features},
                      {"seed", c.seed}};
  if (c.kind == EnsembleKind::gbdt) {
    j["learning_rate"] = c.learning_rate;
    j["subsample"] = c.subsample;
  }
  return j;
}

inline TreeEnsembleConfig ensemble_config_from_json(const nlohmann::json& j) {
  TreeEnsembleConfig c;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "rf") c = default_rf_config();
    else if (kind == "gbdt") c = default_gbdt_config();
    else throw ValidationError("unknown ensemble kind '" + kind + "'");
    c.n_estimators = j.value("n_estimators", c.n_estimators);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
    c.max_features = j.value("max_features", c.max_features);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.subsample = j.value("subsample", c.subsample);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed ensemble config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

struct ForestModel {
  TreeEnsembleConfig config;
  std::vector<RegressionTree> trees;

  template <typename Vec>
  double predict(const Vec& x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return detail::clamp01(s / static_cast<double>(trees.size()));
  }
};

/// Bootstrap-aggregated trees. Tree i draws its bootstrap sample and feature
/// subsets from derive_seed(seed, i), so trees can be fitted in any order or
/// in parallel without changing the forest.
inline std::pair<ForestModel, TrainReport> rf_train(const TrainingSet& data, const TreeEnsembleConfig& config,
                                                    unsigned workers = 1) {
  config.validate();
  if (config.kind != EnsembleKind::random_forest) throw ValidationError("rf_train needs a random-forest config");
  if (data.size() == 0) throw ValidationError("cannot train on an empty dataset");
  const auto start = std::chrono::steady_clock::now();
  const auto target = detail::to_std(data.y);
  const auto n = data.size();
  ForestModel model;
  model.config = config;
  model.trees.resize(static_cast<std::size_t>(config.n_estimators));
  auto fit = [&](std::size_t i) {
    Rng rng(derive_seed(config.seed, i));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.below(n);
    model.trees[i] = fit_tree(data.x, target, std::move(rows), config.tree_params(), rng);
  };
  workers = std::clamp<unsigned>(workers, 1, 64);
  if (workers == 1) {
    for (std::size_t i = 0; i < model.trees.size(); ++i) fit(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < model.trees.size(); i += workers) fit(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  TrainReport report;
  report.seed = config.seed;
  report.config = to_json(config);
  double se = 0.0, ae = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double e = model.predict(data.x.col(static_cast<Eigen::Index>(j))) - data.y[static_cast<Eigen::Index>(j)];
    se += e * e;
    ae += std::abs(e);
  }
  report.train_mse = se / static_cast<double>(n);
  report.train_mae = ae / static_cast<double>(n);
  report.loss.assign(model.trees.size(), report.train_mse);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

struct GbdtModel {
  TreeEnsembleConfig config;
  double init = 0.0;
  std::vector<RegressionTree> trees;

  template <typename Vec>
  double raw_predict(const Vec& x) const {
    double f = init;
    for (const auto& t : trees) f += config.learning_rate * t.predict(x);
    return f;
  }

  template <typename Vec>
  double predict(const Vec& x) const {
    return detail::clamp01(raw_predict(x));
  }
};

/// Stagewise boosting of regression trees on squared-error pseudo-residuals
/// (y - F). `report.loss[k]` is the training MSE after round k + 1.
inline std::pair<GbdtModel, TrainReport> gbdt_train(const TrainingSet& data, const TreeEnsembleConfig& config) {
  config.validate();
  if (config.kind != EnsembleKind::gbdt) throw ValidationError("gbdt_train needs a gbdt config");
  if (data.size() == 0) throw ValidationError("cannot train on an empty dataset");
  const auto start = std::chrono::steady_clock::now();
  const auto n = data.size();
  GbdtModel model;
  model.config = config;
  model.init = data.y.mean();
  std::vector<double> f(n, model.init), residual(n);
  TrainReport report;
  report.seed = config.seed;
  report.config = to_json(config);
  const auto n_sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(n))));
  for (int round = 0; round < config.n_estimators; ++round) {
    for (std::size_t j = 0; j < n; ++j) residual[j] = data.y[static_cast<Eigen::Index>(j)] - f[j];
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(round)));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (n_sub < n) {
      rng.shuffle(rows.begin(), rows.end());
      rows.resize(n_sub);
      std::sort(rows.begin(), rows.end());
    }
    auto tree = fit_tree(data.x, residual, std::move(rows), config.tree_params(), rng);
    double se = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      f[j] += config.learning_rate * tree.predict(data.x.col(static_cast<Eigen::Index>(j)));
      const double e = f[j] - data.y[static_cast<Eigen::Index>(j)];
      se += e * e;
    }
    report.loss.push_back(se / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  double se = 0.0, ae = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double e = model.predict(data.x.col(static_cast<Eigen::Index>(j))) - data.y[static_cast<Eigen::Index>(j)];
    se += e * e;
    ae += std::abs(e);
  }
  report.train_mse = se / static_cast<double>(n);
  report.train_mae = ae / static_cast<double>(n);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

}  // namespace pnsml
