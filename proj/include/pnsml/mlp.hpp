#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <span>
#include <vector>

#include "json.hpp"
#include "pnsml/activation.hpp"
#include "pnsml/error.hpp"
#include "pnsml/rng.hpp"
#include "pnsml/training_set.hpp"

namespace pnsml {

/// he_uniform: W ~ U(+-sqrt(6 / fan_in)), b = 0.
/// lecun_uniform: W, b ~ U(+-1 / sqrt(fan_in)).
enum class InitScheme { he_uniform, lecun_uniform };

inline std::string_view to_string(InitScheme s) { return s == InitScheme::he_uniform ? "he_uniform" : "lecun_uniform"; }

inline InitScheme init_scheme_from_string(std::string_view s) {
  if (s == "he_uniform") return InitScheme::he_uniform;
  if (s == "lecun_uniform") return InitScheme::lecun_uniform;
  throw ValidationError("unknown init scheme '" + std::string(s) + "'");
}

struct MlpConfig {
  std::vector<int> layer_sizes{15, 64, 32, 16, 1};
  InitScheme init = InitScheme::lecun_uniform;
  Activation hidden_activation = Activation::mish;
  double leaky_alpha = kDefaultLeakyAlpha;
  double learning_rate = 0.01;
  int epochs = 1000;
  std::size_t batch_size = 0;  ///< 0 selects full-batch training
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_sizes.size() < 2) throw ValidationError("an MLP needs at least input and output layers");
    for (int s : layer_sizes) {
      if (s <= 0) throw ValidationError("layer sizes must be positive");
    }
    if (layer_sizes.back() != 1) throw ValidationError("the output layer must have one unit");
    if (epochs < 1) throw ValidationError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  }

  std::size_t n_layers() const noexcept { return layer_sizes.size() - 1; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      n += static_cast<std::size_t>(layer_sizes[l + 1]) * (layer_sizes[l] + 1);
    }
    return n;
  }
};

/// Fully connected network. Parameters live in one flat vector; layer l is
/// its weight matrix (fan_out x fan_in, column-major) followed by its bias.
struct MlpModel {
  MlpConfig config;
  Eigen::VectorXd params;

  std::size_t offset(std::size_t layer) const noexcept {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
      off += static_cast<std::size_t>(config.layer_sizes[l + 1]) * (config.layer_sizes[l] + 1);
    }
    return off;
  }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t l) {
    return {params.data() + offset(l), config.layer_sizes[l + 1], config.layer_sizes[l]};
  }
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const {
    return {params.data() + offset(l), config.layer_sizes[l + 1], config.layer_sizes[l]};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l) {
    return {params.data() + offset(l) + static_cast<std::size_t>(config.layer_sizes[l + 1]) * config.layer_sizes[l],
            config.layer_sizes[l + 1]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    return {params.data() + offset(l) + static_cast<std::size_t>(config.layer_sizes[l + 1]) * config.layer_sizes[l],
            config.layer_sizes[l + 1]};
  }

  int n_inputs() const noexcept { return config.layer_sizes.front(); }
};

inline MlpModel mlp_init(const MlpConfig& config) {
  config.validate();
  MlpModel m;
  m.config = config;
  m.params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.parameter_count()));
  Rng rng(derive_seed(config.seed, "mlp-init"));
  for (std::size_t l = 0; l < config.n_layers(); ++l) {
    const double fan_in = config.layer_sizes[l];
    const bool he = config.init == InitScheme::he_uniform;
    const double bound = he ? std::sqrt(6.0 / fan_in) : 1.0 / std::sqrt(fan_in);
    auto w = m.weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    if (!he) {
      auto b = m.bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
    }
  }
  return m;
}

namespace detail {

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a, double alpha) {
  return z.unaryExpr([=](double s) { return activation(a, s, alpha); });
}

/// Activation values and derivatives of `z` in one pass.
inline void activate_with_derivative(const Eigen::MatrixXd& z, Activation a, double alpha, Eigen::MatrixXd& value,
                                     Eigen::MatrixXd& derivative) {
  value.resize(z.rows(), z.cols());
  derivative.resize(z.rows(), z.cols());
  const double* in = z.data();
  double* v = value.data();
  double* d = derivative.data();
  const Eigen::Index n = z.size();
  if (a == Activation::mish) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto p = mish_with_derivative(in[i]);
      v[i] = p.value;
      d[i] = p.derivative;
    }
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = activation(a, in[i], alpha);
    d[i] = activation_derivative(a, in[i], alpha);
  }
}

}  // namespace detail

/// Predictions for a batch of inputs (one column per input).
inline Eigen::VectorXd mlp_forward(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (x.rows() != m.n_inputs()) throw ValidationError("input width does not match the network");
  Eigen::MatrixXd a = x;
  const auto n_layers = m.config.n_layers();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = m.weight(l) * a;
    z.colwise() += m.bias(l);
    if (l + 1 < n_layers) {
      a = detail::activate(z, m.config.hidden_activation, m.config.leaky_alpha);
    } else {
      a = z.unaryExpr([](double s) { return sigmoid(s); });
    }
  }
  return a.row(0).transpose();
}

inline double mlp_forward(const MlpModel& m, std::span<const double> features) {
  Eigen::Map<const Eigen::VectorXd> x(features.data(), static_cast<Eigen::Index>(features.size()));
  return mlp_forward(m, Eigen::MatrixXd(x))[0];
}

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean squared error over the batch and its gradient by backpropagation.
inline LossAndGradient mlp_loss_and_gradient(const MlpModel& m, const Eigen::MatrixXd& x,
                                             const Eigen::VectorXd& y) {
  const auto n_layers = m.config.n_layers();
  const auto& cfg = m.config;
  std::vector<Eigen::MatrixXd> acts;  // acts[l] feeds layer l
  std::vector<Eigen::MatrixXd> deriv;  // activation derivatives of hidden layers
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd z = m.weight(l) * acts.back();
    z.colwise() += m.bias(l);
    if (l + 1 < n_layers) {
      Eigen::MatrixXd a, d;
      detail::activate_with_derivative(z, cfg.hidden_activation, cfg.leaky_alpha, a, d);
      acts.push_back(std::move(a));
      deriv.push_back(std::move(d));
    } else {
      acts.push_back(z.unaryExpr([](double s) { return sigmoid(s); }));
    }
  }
  const double n = static_cast<double>(x.cols());
  const Eigen::RowVectorXd p = acts.back().row(0);
  const Eigen::RowVectorXd diff = p - y.transpose();

  LossAndGradient out;
  out.loss = diff.squaredNorm() / n;
  out.gradient = Eigen::VectorXd::Zero(m.params.size());

  Eigen::MatrixXd delta = (2.0 / n) * diff.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto off = static_cast<Eigen::Index>(m.offset(li));
    const int fan_out = cfg.layer_sizes[li + 1], fan_in = cfg.layer_sizes[li];
    Eigen::Map<Eigen::MatrixXd> gw(out.gradient.data() + off, fan_out, fan_in);
    Eigen::Map<Eigen::VectorXd> gb(out.gradient.data() + off + static_cast<Eigen::Index>(fan_out) * fan_in, fan_out);
    gw.noalias() = delta * acts[li].transpose();
    gb = delta.rowwise().sum();
    if (li > 0) {
      Eigen::MatrixXd back = m.weight(li).transpose() * delta;
      delta = back.cwiseProduct(deriv[li - 1]);
    }
  }
  return out;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t t = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  explicit AdamState(Eigen::Index n = 0) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& s, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads,
                      double lr) {
  if (params.size() != grads.size() || s.m.size() != params.size()) {
    throw ValidationError("Adam state, parameters and gradients must have equal sizes");
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.epsilon);
}

struct TrainReport {
  std::vector<double> loss;  ///< training loss per epoch (or boosting round)
  double train_mse = 0.0;
  double train_mae = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json config;
};

inline nlohmann::json to_json(const MlpConfig& c) {
  return {{"layer_sizes", c.layer_sizes},
          {"init", std::string(to_string(c.init))},
          {"hidden_activation", std::string(to_string(c.hidden_activation))},
          {"leaky_alpha", c.leaky_alpha},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

inline MlpConfig mlp_config_from_json(const nlohmann::json& j) {
  MlpConfig c;
  try {
    c.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    c.init = init_scheme_from_string(j.value("init", std::string("lecun_uniform")));
    c.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    c.leaky_alpha = j.value("leaky_alpha", kDefaultLeakyAlpha);
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.value("batch_size", std::size_t{0});
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed MLP config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Trains one network on one bound. Full-batch by default; with a batch size,
/// minibatches follow a seeded per-epoch shuffle. Records arrive in canonical
/// key order, so supplying them in a different order changes nothing.
inline std::pair<MlpModel, TrainReport> mlp_train(const TrainingSet& data, const MlpConfig& config) {
  config.validate();
  if (data.size() == 0) throw ValidationError("cannot train on an empty dataset");
  if (config.layer_sizes.front() != data.n_features) {
    throw ValidationError("input layer size must equal the feature count");
  }
  const auto start = std::chrono::steady_clock::now();
  auto model = mlp_init(config);
  AdamState adam(model.params.size());
  TrainReport report;
  report.seed = config.seed;
  report.config = to_json(config);
  report.loss.reserve(static_cast<std::size_t>(config.epochs));

  const auto n = data.size();
  const bool full = config.batch_size == 0 || config.batch_size >= n;
  Rng batch_rng(derive_seed(config.seed, "mlp-batches"));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (full) {
      auto lg = mlp_loss_and_gradient(model, data.x, data.y);
      report.loss.push_back(lg.loss);
      adam_step(adam, model.params, lg.gradient, config.learning_rate);
      continue;
    }
    batch_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const auto e = std::min(n, b + config.batch_size);
      Eigen::MatrixXd xb(data.n_features, static_cast<Eigen::Index>(e - b));
      Eigen::VectorXd yb(static_cast<Eigen::Index>(e - b));
      for (std::size_t i = b; i < e; ++i) {
        xb.col(static_cast<Eigen::Index>(i - b)) = data.x.col(static_cast<Eigen::Index>(order[i]));
        yb[static_cast<Eigen::Index>(i - b)] = data.y[static_cast<Eigen::Index>(order[i])];
      }
      auto lg = mlp_loss_and_gradient(model, xb, yb);
      epoch_loss += lg.loss * static_cast<double>(e - b);
      adam_step(adam, model.params, lg.gradient, config.learning_rate);
    }
    report.loss.push_back(epoch_loss / static_cast<double>(n));
  }

  const Eigen::VectorXd pred = mlp_forward(model, data.x);
  report.train_mse = (pred - data.y).squaredNorm() / static_cast<double>(n);
  report.train_mae = (pred - data.y).cwiseAbs().sum() / static_cast<double>(n);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

}  // namespace pnsml
