#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string_view>
#include <vector>

#include "pnsml/datagen.hpp"
#include "pnsml/error.hpp"
#include "pnsml/informer.hpp"

namespace pnsml {

enum class Label { lb, ub };

inline std::string_view to_string(Label l) { return l == Label::lb ? "lb" : "ub"; }

inline Label label_from_string(std::string_view s) {
  if (s == "lb") return Label::lb;
  if (s == "ub") return Label::ub;
  throw ValidationError("label must be lb or ub");
}

/// Binary features of a key as 0/1 reals.
inline Eigen::VectorXd key_features(SubpopKey key, int n_observed) {
  Eigen::VectorXd x(n_observed);
  for (int i = 0; i < n_observed; ++i) x[i] = static_cast<double>((key.value >> i) & 1U);
  return x;
}

/// Model-ready view of a dataset: one column per record, rows in ascending
/// key order regardless of the order records were supplied in.
struct TrainingSet {
  int n_features = 0;
  std::vector<SubpopKey> keys;
  Eigen::MatrixXd x;  ///< n_features x n
  Eigen::VectorXd y;

  std::size_t size() const noexcept { return keys.size(); }

  TrainingSet subset(const std::vector<std::size_t>& idx) const {
    TrainingSet s;
    s.n_features = n_features;
    s.x.resize(n_features, static_cast<Eigen::Index>(idx.size()));
    s.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.keys.push_back(keys[idx[i]]);
      s.x.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(idx[i]));
      s.y[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
    }
    return s;
  }
};

inline TrainingSet make_training_set(const Dataset& d, Label label) {
  std::vector<const LabeledRecord*> recs;
  for (const auto& r : d.records) recs.push_back(&r);
  std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->key < b->key; });
  TrainingSet s;
  s.n_features = d.n_observed;
  s.x.resize(d.n_observed, static_cast<Eigen::Index>(recs.size()));
  s.y.resize(static_cast<Eigen::Index>(recs.size()));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    s.keys.push_back(recs[i]->key);
    s.x.col(static_cast<Eigen::Index>(i)) = key_features(recs[i]->key, d.n_observed);
    s.y[static_cast<Eigen::Index>(i)] = label == Label::lb ? recs[i]->lb : recs[i]->ub;
  }
  return s;
}

}  // namespace pnsml
