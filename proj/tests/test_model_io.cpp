#include <gtest/gtest.h>

#include <random>

#include "pnsml/model.hpp"

using namespace pnsml;

namespace {

TrainingSet synthetic(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  TrainingSet t;
  t.n_features = 15;
  t.x.resize(15, n);
  t.y.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto key = static_cast<std::uint32_t>(gen() & 0x7FFF);
    t.keys.push_back(SubpopKey{key});
    t.x.col(j) = key_features(SubpopKey{key}, 15);
    t.y[j] = 0.1 + 0.5 * t.x(2, j) + 0.2 * t.x(9, j) * t.x(3, j);
  }
  return t;
}

Eigen::MatrixXd all_keys() {
  Eigen::MatrixXd x(15, 32768);
  for (std::uint32_t k = 0; k < 32768; ++k) x.col(k) = key_features(SubpopKey{k}, 15);
  return x;
}

void expect_bit_exact_reload(const Regressor& r) {
  const auto text = to_json(r).dump();
  const auto back = regressor_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.kind(), r.kind());
  EXPECT_EQ(to_json(back).dump(), text);
  const auto x = all_keys();
  const Eigen::VectorXd a = r.predict(x), b = back.predict(x);
  EXPECT_EQ(a, b);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
}

}  // namespace

TEST(ModelIo, MlpReloadsBitExactly) {
  MlpConfig c;
  c.epochs = 30;
  c.hidden_activation = Activation::leaky_relu;
  c.seed = 3;
  Regressor r;
  r.model = mlp_train(synthetic(100, 1), c).first;
  r.meta = {3, "abc", Label::ub, 100};
  expect_bit_exact_reload(r);
  const auto j = to_json(r);
  EXPECT_EQ(j["training_meta"]["dataset_hash"], "abc");
  EXPECT_EQ(j["training_meta"]["label"], "ub");
  EXPECT_EQ(j["config"]["epochs"], 30);
  EXPECT_EQ(j["parameters"]["layers"][0]["weight"].size(), 64U);
}

TEST(ModelIo, ForestReloadsBitExactly) {
  auto c = default_rf_config(4);
  c.n_estimators = 15;
  Regressor r;
  r.model = rf_train(synthetic(150, 2), c).first;
  expect_bit_exact_reload(r);
}

TEST(ModelIo, GbdtReloadsBitExactly) {
  auto c = default_gbdt_config(5);
  c.n_estimators = 25;
  c.subsample = 0.8;
  Regressor r;
  r.model = gbdt_train(synthetic(150, 3), c).first;
  expect_bit_exact_reload(r);
}

TEST(ModelIo, RejectsMalformedDocuments) {
  MlpConfig c;
  c.epochs = 1;
  Regressor r;
  r.model = mlp_init(c);
  auto j = to_json(r);
  j["kind"] = "svm";
  EXPECT_THROW(regressor_from_json(j), ValidationError);
  j = to_json(r);
  j["parameters"]["layers"][0]["bias"].erase(0);
  EXPECT_THROW(regressor_from_json(j), ValidationError);
  j = to_json(r);
  j.erase("training_meta");
  EXPECT_THROW(regressor_from_json(j), ValidationError);
  j = to_json(r);
  j["parameters"]["layers"].erase(1);
  EXPECT_THROW(regressor_from_json(j), ValidationError);
}
