#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "pnsml/bounds.hpp"
#include "pnsml/scm.hpp"

namespace testing_support {

// Small model whose parameters are easy to reason about: M_Y = my_bias on
// feature 1 only, everything else zero unless overwritten.
inline pnsml::ScmSpec toy_spec(int n_features, int n_observed) {
  pnsml::ScmSpec s;
  s.n_features = n_features;
  s.n_observed = n_observed;
  s.mx_coeffs.assign(static_cast<std::size_t>(n_features), 0.0);
  s.my_coeffs.assign(static_cast<std::size_t>(n_features), 0.0);
  s.pz.assign(static_cast<std::size_t>(n_features), 0.5);
  s.c_y = 0.7;
  s.p_ux = 0.4;
  s.p_uy = 0.3;
  return s;
}

// Joint law of (X, Y(0), Y(1)) as eight cell probabilities q[x][y0][y1].
using ResponseLaw = std::array<double, 8>;
inline constexpr int cell(int x, int y0, int y1) { return 4 * x + 2 * y0 + y1; }

inline pnsml::DistributionPair pair_from_law(const ResponseLaw& q) {
  pnsml::DistributionPair d;
  for (int x = 0; x < 2; ++x) {
    for (int y0 = 0; y0 < 2; ++y0) {
      for (int y1 = 0; y1 < 2; ++y1) {
        const double p = q[cell(x, y0, y1)];
        d.p_yx += y1 * p;
        d.p_yxp += y0 * p;
        const int y = x ? y1 : y0;
        if (x && y) d.obs.xy += p;
        if (x && !y) d.obs.xyp += p;
        if (!x && y) d.obs.xpy += p;
        if (!x && !y) d.obs.xpyp += p;
      }
    }
  }
  return d;
}

inline ResponseLaw random_law(std::mt19937_64& gen, double sparsity = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ResponseLaw q{};
  double s = 0.0;
  for (auto& v : q) {
    v = u(gen) < sparsity ? 0.0 : e(gen);
    s += v;
  }
  if (s == 0.0) q[0] = s = 1.0;
  for (auto& v : q) v /= s;
  return q;
}

// Exact min and max of a linear objective c.q over every response law that
// reproduces the pair's experimental and observational margins. Solved by
// enumerating the basic feasible solutions of the 6-equation polytope in R^8.
struct LpRange {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
};

inline LpRange lp_range(const pnsml::DistributionPair& d, const std::array<double, 8>& objective) {
  Eigen::Matrix<double, 6, 8> a = Eigen::Matrix<double, 6, 8>::Zero();
  Eigen::Matrix<double, 6, 1> b;
  for (int x = 0; x < 2; ++x) {
    for (int y0 = 0; y0 < 2; ++y0) {
      for (int y1 = 0; y1 < 2; ++y1) {
        const int k = cell(x, y0, y1);
        const int y = x ? y1 : y0;
        a(0, k) = 1.0;
        a(1, k) = y1;
        a(2, k) = y0;
        a(3, k) = x && y;
        a(4, k) = x && !y;
        a(5, k) = !x && y;
      }
    }
  }
  b << 1.0, d.p_yx, d.p_yxp, d.obs.xy, d.obs.xyp, d.obs.xpy;
  LpRange r;
  // Every basis of 6 columns out of 8, and the degenerate bases obtained by
  // dropping redundant rows, are covered by solving least squares on all
  // column subsets of size <= 6 and keeping exact, nonnegative solutions.
  for (unsigned mask = 1; mask < 256; ++mask) {
    const int k = __builtin_popcount(mask);
    if (k > 6) continue;
    Eigen::MatrixXd sub(6, k);
    std::array<int, 8> cols{};
    int c = 0;
    for (int j = 0; j < 8; ++j) {
      if (mask & (1U << j)) {
        sub.col(c) = a.col(j);
        cols[static_cast<std::size_t>(c++)] = j;
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
    if (qr.rank() < k) continue;
    const Eigen::VectorXd sol = qr.solve(b);
    if ((sub * sol - b).lpNorm<Eigen::Infinity>() > 1e-10) continue;
    if (sol.minCoeff() < -1e-12) continue;
    double v = 0.0;
    for (int i = 0; i < k; ++i) v += objective[static_cast<std::size_t>(cols[static_cast<std::size_t>(i)])] * sol[i];
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
  return r;
}

// P(y_x, y'_{x'}): units with Y(0) = 0 and Y(1) = 1.
inline std::array<double, 8> pns_objective() {
  std::array<double, 8> c{};
  c[cell(0, 0, 1)] = c[cell(1, 0, 1)] = 1.0;
  return c;
}

}  // namespace testing_support
