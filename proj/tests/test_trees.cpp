#include <gtest/gtest.h>

#include <random>

#include "pnsml/ensemble.hpp"

using namespace pnsml;

namespace {

TrainingSet synthetic(int n, std::uint64_t seed, double noise = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> e(0.0, noise > 0 ? noise : 1.0);
  TrainingSet t;
  t.n_features = 15;
  t.x.resize(15, n);
  t.y.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto key = static_cast<std::uint32_t>(gen() & 0x7FFF);
    t.keys.push_back(SubpopKey{key});
    t.x.col(j) = key_features(SubpopKey{key}, 15);
    double y = 0.1 + 0.4 * t.x(0, j) + 0.2 * t.x(1, j) * t.x(2, j) + 0.1 * t.x(7, j);
    if (noise > 0) y += e(gen);
    t.y[j] = std::clamp(y, 0.0, 1.0);
  }
  return t;
}

std::vector<double> as_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Tree, DepthZeroPredictsMean) {
  const auto t = synthetic(40, 1);
  TreeParams p;
  p.max_depth = 0;
  Rng rng(1);
  std::vector<std::size_t> rows(40);
  std::iota(rows.begin(), rows.end(), 0);
  const auto tree = fit_tree(t.x, as_std(t.y), rows, p, rng);
  ASSERT_EQ(tree.nodes.size(), 1U);
  for (int j = 0; j < 40; ++j) EXPECT_NEAR(tree.predict(t.x.col(j)), t.y.mean(), 1e-15);
}

TEST(Tree, PureFeatureVectorPredictsItsLabelMean) {
  TrainingSet t;
  t.n_features = 15;
  t.x = Eigen::MatrixXd::Zero(15, 5);
  t.y.resize(5);
  t.y << 0.1, 0.2, 0.3, 0.4, 0.5;
  Rng rng(2);
  const auto tree = fit_tree(t.x, as_std(t.y), {0, 1, 2, 3, 4}, TreeParams{}, rng);
  EXPECT_EQ(tree.nodes.size(), 1U);
  EXPECT_NEAR(tree.predict(t.x.col(0)), 0.3, 1e-15);
}

TEST(Tree, RecoversAStepFunctionExactly) {
  const auto t = synthetic(300, 3);
  Rng rng(3);
  std::vector<std::size_t> rows(300);
  std::iota(rows.begin(), rows.end(), 0);
  const auto tree = fit_tree(t.x, as_std(t.y), rows, TreeParams{}, rng);
  for (int j = 0; j < 300; ++j) EXPECT_NEAR(tree.predict(t.x.col(j)), t.y[j], 1e-12);
}

TEST(Tree, JsonRoundTripAndValidation) {
  const auto t = synthetic(100, 4);
  Rng rng(4);
  std::vector<std::size_t> rows(100);
  std::iota(rows.begin(), rows.end(), 0);
  const auto tree = fit_tree(t.x, as_std(t.y), rows, TreeParams{}, rng);
  EXPECT_EQ(tree_from_json(to_json(tree)), tree);
  auto bad = to_json(tree);
  bad[0]["left"] = 0;  // a cycle back to the root
  EXPECT_THROW(tree_from_json(bad), ValidationError);
  EXPECT_THROW(fit_tree(t.x, as_std(t.y), {}, TreeParams{}, rng), ValidationError);
}

TEST(RandomForest, SingleStumpForestPredictsBootstrapMean) {
  const auto t = synthetic(60, 5);
  auto c = default_rf_config(5);
  c.n_estimators = 1;
  c.max_depth = 0;
  const auto [m, r] = rf_train(t, c);
  const double v = m.predict(t.x.col(0));
  for (int j = 1; j < 60; ++j) EXPECT_EQ(m.predict(t.x.col(j)), v);
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
}

TEST(RandomForest, WorkerCountDoesNotChangeModel) {
  const auto t = synthetic(200, 6, 0.05);
  auto c = default_rf_config(6);
  c.n_estimators = 30;
  const auto [a, ra] = rf_train(t, c, 1);
  const auto [b, rb] = rf_train(t, c, 3);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(ra.train_mse, rb.train_mse);
}

TEST(RandomForest, FitsSignalAndClampsOutput) {
  const auto t = synthetic(400, 7, 0.02);
  const auto [m, r] = rf_train(t, default_rf_config(7));
  EXPECT_LT(r.train_mae, 0.03);
  for (int j = 0; j < 400; ++j) {
    const double p = m.predict(t.x.col(j));
    EXPECT_TRUE(p >= 0.0 && p <= 1.0);
  }
  EXPECT_EQ(r.loss.size(), 200U);
}

TEST(RandomForest, RejectsBadInput) {
  TrainingSet empty;
  empty.n_features = 15;
  EXPECT_THROW(rf_train(empty, default_rf_config()), ValidationError);
  auto c = default_rf_config();
  c.n_estimators = 0;
  EXPECT_THROW(rf_train(synthetic(10, 1), c), ValidationError);
  EXPECT_THROW(rf_train(synthetic(10, 1), default_gbdt_config()), ValidationError);
}

TEST(Gbdt, ZeroRoundsPredictsMean) {
  const auto t = synthetic(50, 8);
  auto c = default_gbdt_config(8);
  c.n_estimators = 0;
  const auto [m, r] = gbdt_train(t, c);
  for (int j = 0; j < 50; ++j) EXPECT_NEAR(m.predict(t.x.col(j)), t.y.mean(), 1e-15);
  EXPECT_TRUE(r.loss.empty());
}

TEST(Gbdt, OverfitsTwentyRecords) {
  const auto t = synthetic(20, 9, 0.1);
  auto c = default_gbdt_config(9);
  c.learning_rate = 1.0;
  c.max_depth = 20;
  c.n_estimators = 50;
  const auto [m, r] = gbdt_train(t, c);
  EXPECT_LT(r.train_mse, 1e-20);
}

TEST(Gbdt, FirstRoundsDecreaseTrainingError) {
  const auto t = synthetic(500, 10, 0.05);
  const auto [m, r] = gbdt_train(t, default_gbdt_config(10));
  ASSERT_EQ(r.loss.size(), 300U);
  double prev = (t.y.array() - t.y.mean()).square().mean();
  for (int k = 0; k < 10; ++k) {
    EXPECT_LT(r.loss[static_cast<std::size_t>(k)], prev) << "round " << k + 1;
    prev = r.loss[static_cast<std::size_t>(k)];
  }
}

TEST(Gbdt, SubsampleIsSeeded) {
  const auto t = synthetic(200, 11, 0.05);
  auto c = default_gbdt_config(11);
  c.subsample = 0.6;
  c.n_estimators = 40;
  const auto a = gbdt_train(t, c).first, b = gbdt_train(t, c).first;
  EXPECT_EQ(a.trees, b.trees);
  c.seed = 12;
  EXPECT_NE(gbdt_train(t, c).first.trees, a.trees);
}

TEST(EnsembleConfig, ValidationAndJson) {
  auto c = default_gbdt_config(3);
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = default_gbdt_config(3);
  c.subsample = 1.5;
  EXPECT_THROW(c.validate(), ValidationError);
  for (const auto& cfg : {default_rf_config(4), default_gbdt_config(5)}) {
    EXPECT_EQ(to_json(ensemble_config_from_json(to_json(cfg))), to_json(cfg));
  }
  EXPECT_EQ(default_rf_config().max_features, 4);
  EXPECT_THROW(ensemble_config_from_json({{"kind", "svm"}}), ValidationError);
}
