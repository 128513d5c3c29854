// Bounds for one subpopulation of the benchmark SCM: estimated from
// simulated data, exact from the informer oracle, and predicted by a small
// network trained on every subpopulation that received enough samples.

#include <algorithm>
#include <cstdio>

#include "pnsml/pnsml.hpp"

int main() {
  using namespace pnsml;
  const auto spec = paper_scm();

  const auto counters = merge_counters(generate_counters(spec, 2'000'000, SampleRegime::experimental, 7),
                                       generate_counters(spec, 2'000'000, SampleRegime::observational, 7));
  const auto dataset = build_dataset(counters, 400, 7);
  const auto& busiest = *std::max_element(dataset.records.begin(), dataset.records.end(),
                                          [](const auto& a, const auto& b) { return a.n_exp < b.n_exp; });
  const SubpopKey key = busiest.key;
  std::printf("subpopulation %u: %llu experimental samples\n", key.value,
              static_cast<unsigned long long>(busiest.n_exp));

  const auto est = pns_bounds(estimate_distributions(counters, key));
  const auto exact = subpop_true_bounds(spec, key);
  std::printf("estimated PNS in [%.4f, %.4f]\n", est.lb, est.ub);
  std::printf("exact     PNS in [%.4f, %.4f]\n", exact.lb, exact.ub);

  MlpConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 7;
  const auto [lb_model, report] = mlp_train(make_training_set(dataset, Label::lb), cfg);
  const Eigen::MatrixXd x = key_features(key, spec.n_observed);
  std::printf("MLP lb from %zu records: %.4f (final train MSE %.5f)\n", dataset.size(), mlp_forward(lb_model, x)[0],
              report.train_mse);
}
