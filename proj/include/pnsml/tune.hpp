#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pnsml/ensemble.hpp"
#include "pnsml/error.hpp"
#include "pnsml/rng.hpp"
#include "pnsml/training_set.hpp"

namespace pnsml {

struct ParamRange {
  std::string name;  ///< a TreeEnsembleConfig field name
  double lo = 0.0;
  double hi = 0.0;
  bool integer = false;
  bool log_scale = false;
};

/// Parameters in priority order: the grid stage refines the first two.
struct SearchSpace {
  EnsembleKind kind = EnsembleKind::random_forest;
  std::vector<ParamRange> params;
};

inline SearchSpace default_search_space(EnsembleKind kind) {
  if (kind == EnsembleKind::random_forest) {
    return {kind,
            {{"max_depth", 4, 16, true, false},
             {"max_features", 2, 15, true, false},
             {"n_estimators", 100, 300, true, false},
             {"min_samples_split", 2, 10, true, false}}};
  }
  return {kind,
          {{"learning_rate", 0.02, 0.3, false, true},
           {"max_depth", 2, 6, true, false},
           {"n_estimators", 100, 400, true, false},
           {"subsample", 0.6, 1.0, false, false}}};
}

inline void set_param(TreeEnsembleConfig& c, const std::string& name, double v) {
  if (name == "n_estimators") c.n_estimators = static_cast<int>(std::lround(v));
  else if (name == "max_depth") c.max_depth = static_cast<int>(std::lround(v));
  else if (name == "min_samples_split") c.min_samples_split = static_cast<int>(std::lround(v));
  else if (name == "max_features") c.max_features = static_cast<int>(std::lround(v));
  else if (name == "learning_rate") c.learning_rate = v;
  else if (name == "subsample") c.subsample = v;
  else throw ValidationError("unknown tunable parameter '" + name + "'");
}

inline double get_param(const TreeEnsembleConfig& c, const std::string& name) {
  if (name == "n_estimators") return c.n_estimators;
  if (name == "max_depth") return c.max_depth;
  if (name == "min_samples_split") return c.min_samples_split;
  if (name == "max_features") return c.max_features;
  if (name == "learning_rate") return c.learning_rate;
  if (name == "subsample") return c.subsample;
  throw ValidationError("unknown tunable parameter '" + name + "'");
}

/// Out-of-fold MAE, pooled over all rows. Rows are dealt into k folds after a
/// seeded shuffle.
inline double cross_validate(const TrainingSet& data, const TreeEnsembleConfig& config, int k_folds,
                             std::uint64_t fold_seed) {
  if (k_folds < 2) throw ValidationError("cross-validation needs at least two folds");
  if (data.size() < static_cast<std::size_t>(k_folds)) throw ValidationError("fewer rows than folds");
  std::vector<std::size_t> perm(data.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(fold_seed);
  rng.shuffle(perm.begin(), perm.end());
  double abs_err = 0.0;
  for (int f = 0; f < k_folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      (static_cast<int>(i % static_cast<std::size_t>(k_folds)) == f ? test : train).push_back(perm[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    const auto tr = data.subset(train);
    const auto te = data.subset(test);
    auto score = [&](const auto& model) {
      for (std::size_t j = 0; j < te.size(); ++j) {
        const auto col = te.x.col(static_cast<Eigen::Index>(j));
        abs_err += std::abs(model.predict(col) - te.y[static_cast<Eigen::Index>(j)]);
      }
    };
    if (config.kind == EnsembleKind::random_forest) score(rf_train(tr, config).first);
    else score(gbdt_train(tr, config).first);
  }
  return abs_err / static_cast<double>(data.size());
}

struct CandidateScore {
  TreeEnsembleConfig config;
  double cv_mae = 0.0;
  int stage = 1;
};

struct TuneResult {
  TreeEnsembleConfig best;
  double best_cv_mae = 0.0;
  std::vector<CandidateScore> evaluated;
};

namespace detail {

inline double sample_param(const ParamRange& r, Rng& rng) {
  double v = r.log_scale ? std::exp(rng.uniform(std::log(r.lo), std::log(r.hi))) : rng.uniform(r.lo, r.hi);
  if (r.integer) v = std::clamp(std::floor(rng.uniform() * (r.hi - r.lo + 1.0)) + r.lo, r.lo, r.hi);
  return v;
}

/// {w - step, w, w + step}, step = a tenth of the range (on a log axis for log
/// parameters, at least 1 for integers), clipped to the range.
inline std::vector<double> neighbourhood(const ParamRange& r, double w) {
  std::vector<double> out;
  for (int d = -1; d <= 1; ++d) {
    double v;
    if (r.log_scale) {
      const double step = (std::log(r.hi) - std::log(r.lo)) / 10.0;
      v = std::exp(std::log(w) + d * step);
    } else {
      double step = (r.hi - r.lo) / 10.0;
      if (r.integer) step = std::max(1.0, std::round(step));
      v = w + d * step;
    }
    v = std::clamp(v, r.lo, r.hi);
    if (r.integer) v = std::round(v);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

}  // namespace detail

/// Two-stage search. Stage 1 scores `budget` configurations drawn uniformly
/// from the space; stage 2 scores the 3x3 grid around the stage-1 winner over
/// the first two parameters (the rest stay at the winner's values). Every
/// candidate is scored by k-fold CV MAE on the same folds; the lowest score
/// wins, ties going to the earlier candidate.
inline TuneResult tune(const TreeEnsembleConfig& base, const TrainingSet& data, const SearchSpace& space, int budget,
                       int k_folds, std::uint64_t seed, unsigned workers = 1) {
  if (budget < 1) throw ValidationError("tuning budget must be at least 1");
  if (k_folds < 2) throw ValidationError("cross-validation needs at least two folds");
  if (space.kind != base.kind) throw ValidationError("search space and base config disagree on model kind");
  const auto fold_seed = derive_seed(seed, "tune-folds");
  workers = std::clamp<unsigned>(workers, 1, 64);

  auto score_all = [&](std::vector<CandidateScore>& cands) {
    auto run = [&](std::size_t i) { cands[i].cv_mae = cross_validate(data, cands[i].config, k_folds, fold_seed); };
    if (workers == 1) {
      for (std::size_t i = 0; i < cands.size(); ++i) run(i);
      return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < cands.size(); i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  };

  Rng rng(derive_seed(seed, "tune-sample"));
  std::vector<CandidateScore> stage1;
  for (int b = 0; b < budget; ++b) {
    auto c = base;
    for (const auto& p : space.params) set_param(c, p.name, detail::sample_param(p, rng));
    c.validate();
    stage1.push_back({c, 0.0, 1});
  }
  score_all(stage1);

  TuneResult result;
  result.evaluated = stage1;
  auto argmin = [](const std::vector<CandidateScore>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i].cv_mae < v[best].cv_mae) best = i;
    }
    return best;
  };
  const auto winner = stage1[argmin(stage1)].config;

  if (budget > 1 && !space.params.empty()) {
    const auto& p0 = space.params[0];
    const auto v0 = detail::neighbourhood(p0, get_param(winner, p0.name));
    std::vector<double> v1{0.0};
    if (space.params.size() > 1) v1 = detail::neighbourhood(space.params[1], get_param(winner, space.params[1].name));
    std::vector<CandidateScore> stage2;
    for (double a : v0) {
      for (double b : v1) {
        auto c = winner;
        set_param(c, p0.name, a);
        if (space.params.size() > 1) set_param(c, space.params[1].name, b);
        const auto key = to_json(c);
        const bool seen = std::any_of(result.evaluated.begin(), result.evaluated.end(),
                                      [&](const CandidateScore& s) { return to_json(s.config) == key; });
        if (!seen) stage2.push_back({c, 0.0, 2});
      }
    }
    score_all(stage2);
    result.evaluated.insert(result.evaluated.end(), stage2.begin(), stage2.end());
  }
  const auto best = argmin(result.evaluated);
  result.best = result.evaluated[best].config;
  result.best_cv_mae = result.evaluated[best].cv_mae;
  return result;
}

inline nlohmann::json to_json(const TuneResult& r) {
  auto cands = nlohmann::json::array();
  for (const auto& c : r.evaluated) cands.push_back({{"config", to_json(c.config)}, {"cv_mae", c.cv_mae}, {"stage", c.stage}});
  return {{"best", to_json(r.best)}, {"best_cv_mae", r.best_cv_mae}, {"candidates", cands}};
}

}  // namespace pnsml
