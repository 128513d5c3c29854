#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pnsml/error.hpp"

namespace pnsml {

inline constexpr double kFlagTolerance = 1e-9;
inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kDenominatorGuard = 1e-12;

/// 2x2 joint P(X, Y). `xy` is P(x, y), `xyp` is P(x, y'), and so on, where
/// x means X = 1 and y means Y = 1.
struct JointTable {
  double xy = 0.0;
  double xyp = 0.0;
  double xpy = 0.0;
  double xpyp = 0.0;

  double total() const noexcept { return xy + xyp + xpy + xpyp; }
  bool operator==(const JointTable&) const = default;
};

/// Experimental and observational quantities for one (sub)population.
struct DistributionPair {
  double p_yx = 0.0;   ///< P(y_x) = P(Y=1 | do(X=1))
  double p_yxp = 0.0;  ///< P(y_{x'}) = P(Y=1 | do(X=0))
  JointTable obs;

  double p_y() const noexcept { return obs.xy + obs.xpy; }
  double p_yp() const noexcept { return 1.0 - p_y(); }
  double p_ypxp() const noexcept { return 1.0 - p_yxp; }  ///< P(y'_{x'})
  double p_ypx() const noexcept { return 1.0 - p_yx; }    ///< P(y'_x)

  void validate() const {
    auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in01(p_yx) || !in01(p_yxp) || !in01(obs.xy) || !in01(obs.xyp) || !in01(obs.xpy) ||
        !in01(obs.xpyp)) {
      throw ValidationError("distribution entries must lie in [0, 1]");
    }
    if (std::abs(obs.total() - 1.0) > kFlagTolerance) {
      throw ValidationError("observational joint must sum to 1");
    }
  }
};

enum class Quantity { pns, pn, ps };

inline const char* to_string(Quantity q) {
  switch (q) {
    case Quantity::pns: return "PNS";
    case Quantity::pn: return "PN";
    case Quantity::ps: return "PS";
  }
  return "?";
}

struct CausationBounds {
  Quantity quantity = Quantity::pns;
  double lb = 0.0;
  double ub = 1.0;
  bool consistent = true;

  double width() const noexcept { return ub - lb; }
};

namespace detail {

inline CausationBounds make_bounds(Quantity q, double lb, double ub) {
  return {q, lb, ub, lb <= ub + kFlagTolerance};
}

}  // namespace detail

/// Tight bounds on P(y_x, y'_{x'}) from combined experimental and
/// observational data. Inconsistent inputs are not rejected; they come back
/// with `consistent == false`.
inline CausationBounds pns_bounds(const DistributionPair& d) {
  const double py = d.p_y();
  const double lb = std::max({0.0, d.p_yx - d.p_yxp, py - d.p_yxp, d.p_yx - py});
  const double ub = std::min({d.p_yx, d.p_ypxp(), d.obs.xy + d.obs.xpyp,
                              d.p_yx - d.p_yxp + d.obs.xyp + d.obs.xpy});
  return detail::make_bounds(Quantity::pns, lb, ub);
}

/// Bounds on P(y'_{x'} | x, y). Requires P(x, y) > 0.
inline CausationBounds pn_bounds(const DistributionPair& d) {
  if (d.obs.xy <= kDenominatorGuard) {
    throw UndefinedQuantity("PN is undefined when P(x, y) = 0");
  }
  const double lb = std::max(0.0, (d.p_y() - d.p_yxp) / d.obs.xy);
  const double ub = std::min(1.0, (d.p_ypxp() - d.obs.xpyp) / d.obs.xy);
  return detail::make_bounds(Quantity::pn, lb, ub);
}

/// Bounds on P(y_x | x', y'). Requires P(x', y') > 0.
inline CausationBounds ps_bounds(const DistributionPair& d) {
  if (d.obs.xpyp <= kDenominatorGuard) {
    throw UndefinedQuantity("PS is undefined when P(x', y') = 0");
  }
  const double lb = std::max(0.0, (d.p_yp() - d.p_ypx()) / d.obs.xpyp);
  const double ub = std::min(1.0, (d.p_yx - d.obs.xy) / d.obs.xpyp);
  return detail::make_bounds(Quantity::ps, lb, ub);
}

inline CausationBounds bounds_for(Quantity q, const DistributionPair& d) {
  switch (q) {
    case Quantity::pn: return pn_bounds(d);
    case Quantity::ps: return ps_bounds(d);
    case Quantity::pns: break;
  }
  return pns_bounds(d);
}

struct PointEstimates {
  double pns = 0.0;
  double pn = 0.0;
  double ps = 0.0;
};

/// Point values under monotonicity (y'_x and y_{x'} never both hold).
/// The caller vouches for monotonicity; it cannot be tested from the data.
inline PointEstimates identifiable_point_estimates(const DistributionPair& d) {
  if (d.obs.xy <= kDenominatorGuard) throw UndefinedQuantity("PN is undefined when P(x, y) = 0");
  if (d.obs.xpyp <= kDenominatorGuard) throw UndefinedQuantity("PS is undefined when P(x', y') = 0");
  return {d.p_yx - d.p_yxp, (d.p_y() - d.p_yxp) / d.obs.xy, (d.p_yx - d.p_y()) / d.obs.xpyp};
}

struct ConsistencyViolation {
  std::string inequality;
  double slack = 0.0;  ///< negative: amount by which the inequality fails
};

struct ConsistencyReport {
  std::vector<ConsistencyViolation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Cross-regime compatibility: an experimental arm can never be less likely
/// than the matching observational cell, nor exceed it by more than the
/// probability mass of the other treatment arm.
///   P(x,y)  <= P(y_x)     <= 1 - P(x,y')
///   P(x',y) <= P(y_{x'})  <= 1 - P(x',y')
inline ConsistencyReport check_consistency(const DistributionPair& d) {
  ConsistencyReport r;
  auto check = [&](const char* name, double slack) {
    if (slack < -kFlagTolerance) r.violations.push_back({name, slack});
  };
  check("P(x,y) <= P(y_x)", d.p_yx - d.obs.xy);
  check("P(y_x) <= 1 - P(x,y')", 1.0 - d.obs.xyp - d.p_yx);
  check("P(x',y) <= P(y_x')", d.p_yxp - d.obs.xpy);
  check("P(y_x') <= 1 - P(x',y')", 1.0 - d.obs.xpyp - d.p_yxp);
  return r;
}

}  // namespace pnsml
