#pragma once

#include <Eigen/Dense>

#include <string>
#include <variant>

#include "json.hpp"
#include "pnsml/ensemble.hpp"
#include "pnsml/error.hpp"
#include "pnsml/mlp.hpp"
#include "pnsml/training_set.hpp"

namespace pnsml {

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::string dataset_hash;
  Label label = Label::lb;
  std::size_t n_records = 0;
};

/// Any trained bound regressor, with the provenance it was persisted with.
struct Regressor {
  std::variant<MlpModel, ForestModel, GbdtModel> model;
  TrainingMeta meta;

  std::string kind() const {
    switch (model.index()) {
      case 0: return "mlp";
      case 1: return "rf";
      default: return "gbdt";
    }
  }

  int n_inputs() const {
    if (const auto* m = std::get_if<MlpModel>(&model)) return m->n_inputs();
    return -1;
  }

  /// One prediction per column of `x`, each in [0, 1].
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (const auto* m = std::get_if<MlpModel>(&model)) return mlp_forward(*m, x);
    Eigen::VectorXd out(x.cols());
    std::visit(
        [&](const auto& m) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, MlpModel>) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) out[j] = m.predict(x.col(j));
          }
        },
        model);
    return out;
  }
};

namespace detail {

inline nlohmann::json mlp_parameters_json(const MlpModel& m) {
  auto layers = nlohmann::json::array();
  for (std::size_t l = 0; l < m.config.n_layers(); ++l) {
    const auto w = m.weight(l);
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index c = 0; c < w.cols(); ++c) row[static_cast<std::size_t>(c)] = w(r, c);
      rows.push_back(row);
    }
    const auto b = m.bias(l);
    layers.push_back({{"weight", rows}, {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layers", layers}};
}

inline MlpModel mlp_from_json(const nlohmann::json& config, const nlohmann::json& params) {
  MlpModel m;
  m.config = mlp_config_from_json(config);
  m.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.config.parameter_count()));
  const auto& layers = params.at("layers");
  if (layers.size() != m.config.n_layers()) throw ValidationError("MLP layer count does not match its config");
  for (std::size_t l = 0; l < m.config.n_layers(); ++l) {
    auto w = m.weight(l);
    const auto& rows = layers[l].at("weight");
    if (static_cast<Eigen::Index>(rows.size()) != w.rows()) throw ValidationError("MLP weight shape mismatch");
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != w.cols()) throw ValidationError("MLP weight shape mismatch");
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = row[static_cast<std::size_t>(c)];
    }
    const auto bias = layers[l].at("bias").get<std::vector<double>>();
    auto b = m.bias(l);
    if (static_cast<Eigen::Index>(bias.size()) != b.size()) throw ValidationError("MLP bias shape mismatch");
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bias[static_cast<std::size_t>(i)];
  }
  if (!m.params.allFinite()) throw ValidationError("MLP parameters must be finite");
  return m;
}

inline nlohmann::json trees_json(const std::vector<RegressionTree>& trees) {
  auto arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(to_json(t));
  return arr;
}

inline std::vector<RegressionTree> trees_from_json(const nlohmann::json& j) {
  std::vector<RegressionTree> out;
  for (const auto& t : j) out.push_back(tree_from_json(t));
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const Regressor& r) {
  nlohmann::json j;
  j["kind"] = r.kind();
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        j["config"] = to_json(m.config);
        if constexpr (std::is_same_v<T, MlpModel>) {
          j["parameters"] = detail::mlp_parameters_json(m);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          j["parameters"] = {{"trees", detail::trees_json(m.trees)}};
        } else {
          j["parameters"] = {{"init", m.init}, {"trees", detail::trees_json(m.trees)}};
        }
      },
      r.model);
  j["training_meta"] = {{"seed", r.meta.seed},
                        {"dataset_hash", r.meta.dataset_hash},
                        {"label", std::string(to_string(r.meta.label))},
                        {"n_records", r.meta.n_records}};
  return j;
}

inline Regressor regressor_from_json(const nlohmann::json& j) {
  Regressor r;
  try {
    const auto kind = j.at("kind").get<std::string>();
    const auto& cfg = j.at("config");
    const auto& params = j.at("parameters");
    if (kind == "mlp") {
      r.model = detail::mlp_from_json(cfg, params);
    } else if (kind == "rf") {
      ForestModel f;
      f.config = ensemble_config_from_json(cfg);
      f.trees = detail::trees_from_json(params.at("trees"));
      if (f.trees.empty()) throw ValidationError("forest without trees");
      r.model = std::move(f);
    } else if (kind == "gbdt") {
      GbdtModel g;
      g.config = ensemble_config_from_json(cfg);
      g.init = params.at("init").get<double>();
      g.trees = detail::trees_from_json(params.at("trees"));
      r.model = std::move(g);
    } else {
      throw ValidationError("unknown model kind '" + kind + "'");
    }
    const auto& m = j.at("training_meta");
    r.meta.seed = m.at("seed").get<std::uint64_t>();
    r.meta.dataset_hash = m.at("dataset_hash").get<std::string>();
    r.meta.label = label_from_string(m.at("label").get<std::string>());
    r.meta.n_records = m.at("n_records").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
  return r;
}

}  // namespace pnsml
