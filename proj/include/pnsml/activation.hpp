#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "pnsml/error.hpp"

namespace pnsml {

enum class Activation { relu, leaky_relu, mish };

inline constexpr double kDefaultLeakyAlpha = 0.01;

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::mish: return "mish";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu" || s == "leakyrelu" || s == "leaky") return Activation::leaky_relu;
  if (s == "mish") return Activation::mish;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

/// ln(1 + e^s) without overflow for large s or cancellation for very negative s.
inline double softplus(double s) noexcept { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

inline double sigmoid(double s) noexcept {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// tanh(softplus(s)) from a single exponential: with n = e^s,
/// tanh(ln(1 + n)) = n (n + 2) / (n (n + 2) + 2). For s > 20 the ratio is 1
/// to double precision.
inline double tanh_softplus(double s) noexcept {
  if (s > 20.0) return 1.0;
  const double n = std::exp(s);
  const double q = n * (n + 2.0);
  return q / (q + 2.0);
}

inline double mish(double s) noexcept { return s * tanh_softplus(s); }

/// d/ds [s tanh(softplus(s))] = tanh(sp) + s * sech^2(sp) * sigmoid(s).
inline double mish_derivative(double s) noexcept {
  const double t = tanh_softplus(s);
  return t + s * (1.0 - t * t) * sigmoid(s);
}

/// Value and derivative together, sharing the exponential.
struct ActivationPair {
  double value;
  double derivative;
};

inline ActivationPair mish_with_derivative(double s) noexcept {
  if (s > 20.0) return {s, 1.0};
  const double n = std::exp(s);
  const double q = n * (n + 2.0);
  const double t = q / (q + 2.0);
  return {s * t, t + s * (1.0 - t * t) * (n / (1.0 + n))};
}

inline double activation(Activation kind, double s, double alpha = kDefaultLeakyAlpha) noexcept {
  switch (kind) {
    case Activation::relu: return s > 0.0 ? s : 0.0;
    case Activation::leaky_relu: return s >= 0.0 ? s : alpha * s;
    case Activation::mish: return mish(s);
  }
  return s;
}

/// Subgradient convention at s = 0: ReLU' = 0, LeakyReLU' = alpha.
inline double activation_derivative(Activation kind, double s, double alpha = kDefaultLeakyAlpha) noexcept {
  switch (kind) {
    case Activation::relu: return s > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return s > 0.0 ? 1.0 : alpha;
    case Activation::mish: return mish_derivative(s);
  }
  return 1.0;
}

}  // namespace pnsml
