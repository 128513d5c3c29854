#include <gtest/gtest.h>

#include <random>

#include "pnsml/bounds.hpp"
#include "support.hpp"

using namespace pnsml;
namespace ts = testing_support;

namespace {

DistributionPair worked() {
  DistributionPair d;
  d.p_yx = 0.9;
  d.p_yxp = 0.5;
  d.obs = {0.45, 0.05, 0.25, 0.25};
  return d;
}

DistributionPair uniform_half() {
  DistributionPair d;
  d.p_yx = d.p_yxp = 0.5;
  d.obs = {0.25, 0.25, 0.25, 0.25};
  return d;
}

}  // namespace

TEST(PnsBounds, UniformObservationalHalfEffects) {
  const auto b = pns_bounds(uniform_half());
  EXPECT_EQ(b.lb, 0.0);
  EXPECT_EQ(b.ub, 0.5);
  EXPECT_TRUE(b.consistent);
  EXPECT_EQ(b.quantity, Quantity::pns);
}

TEST(PnsBounds, DeterministicTreatment) {
  DistributionPair d;
  d.p_yx = 1.0;
  d.p_yxp = 0.0;
  d.obs = {0.5, 0.0, 0.0, 0.5};
  const auto b = pns_bounds(d);
  EXPECT_EQ(b.lb, 1.0);
  EXPECT_EQ(b.ub, 1.0);
}

TEST(PnsBounds, WorkedExample) {
  const auto b = pns_bounds(worked());
  EXPECT_NEAR(b.lb, 0.4, 1e-12);
  EXPECT_NEAR(b.ub, 0.5, 1e-12);
}

TEST(PnBounds, WorkedExample) {
  const auto b = pn_bounds(worked());
  EXPECT_NEAR(b.lb, 0.2 / 0.45, 1e-12);
  EXPECT_NEAR(b.ub, 0.25 / 0.45, 1e-12);
  EXPECT_NEAR(b.lb, 0.4444, 1e-4);
  EXPECT_NEAR(b.ub, 0.5556, 1e-4);
}

TEST(PnBounds, ZeroNumeratorClampsToZero) {
  auto d = worked();
  d.p_yxp = d.p_y();
  EXPECT_EQ(pn_bounds(d).lb, 0.0);
}

TEST(PnBounds, UndefinedWithoutTreatedOutcomes) {
  auto d = worked();
  d.obs = {0.0, 0.5, 0.25, 0.25};
  EXPECT_THROW(pn_bounds(d), UndefinedQuantity);
}

TEST(PsBounds, WorkedExample) {
  const auto b = ps_bounds(worked());
  EXPECT_NEAR(b.lb, 0.8, 1e-12);
  EXPECT_EQ(b.ub, 1.0);
}

TEST(PsBounds, ZeroNumeratorClampsToZero) {
  auto d = worked();
  d.p_yx = d.p_y();  // P(y') = P(y'_x)
  EXPECT_EQ(ps_bounds(d).lb, 0.0);
}

TEST(PsBounds, UndefinedWithoutUntreatedNonOutcomes) {
  auto d = worked();
  d.obs = {0.45, 0.05, 0.5, 0.0};
  EXPECT_THROW(ps_bounds(d), UndefinedQuantity);
}

TEST(BoundsFor, DispatchesOnQuantity) {
  EXPECT_EQ(bounds_for(Quantity::pn, worked()).quantity, Quantity::pn);
  EXPECT_EQ(bounds_for(Quantity::ps, worked()).lb, ps_bounds(worked()).lb);
  EXPECT_EQ(bounds_for(Quantity::pns, worked()).ub, pns_bounds(worked()).ub);
}

TEST(PnsBounds, InconsistentInputIsFlaggedNotRejected) {
  DistributionPair d;
  d.p_yx = 0.1;
  d.p_yxp = 0.9;
  d.obs = {0.5, 0.0, 0.0, 0.5};
  const auto b = pns_bounds(d);
  EXPECT_FALSE(b.consistent);
  EXPECT_GT(b.lb, b.ub);
}

// The closed forms must be exactly the range of the counterfactual quantity
// over every response-type law that reproduces the observed margins.
TEST(BoundsOracle, MatchesExactLinearProgramOnRandomLaws) {
  std::mt19937_64 gen(20240601);
  std::array<double, 8> pn_obj{}, ps_obj{};
  pn_obj[ts::cell(1, 0, 1)] = 1.0;  // treated, outcome, would not have had it untreated
  ps_obj[ts::cell(0, 0, 1)] = 1.0;  // untreated, no outcome, would have had it treated
  int checked = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const auto law = ts::random_law(gen, trial % 3 == 0 ? 0.4 : 0.0);
    const auto d = ts::pair_from_law(law);
    const auto lp = ts::lp_range(d, ts::pns_objective());
    const auto b = pns_bounds(d);
    ASSERT_TRUE(b.consistent);
    EXPECT_NEAR(b.lb, lp.min, 1e-9) << "trial " << trial;
    EXPECT_NEAR(b.ub, lp.max, 1e-9) << "trial " << trial;
    if (d.obs.xy > 1e-6) {
      const auto r = ts::lp_range(d, pn_obj);
      const auto pn = pn_bounds(d);
      EXPECT_NEAR(pn.lb, r.min / d.obs.xy, 1e-7) << "trial " << trial;
      EXPECT_NEAR(pn.ub, r.max / d.obs.xy, 1e-7) << "trial " << trial;
    }
    if (d.obs.xpyp > 1e-6) {
      const auto r = ts::lp_range(d, ps_obj);
      const auto ps = ps_bounds(d);
      EXPECT_NEAR(ps.lb, r.min / d.obs.xpyp, 1e-7) << "trial " << trial;
      EXPECT_NEAR(ps.ub, r.max / d.obs.xpyp, 1e-7) << "trial " << trial;
    }
    ++checked;
  }
  EXPECT_GE(checked, 1000);
}

TEST(BoundsOracle, TrueValueLiesInsideBounds) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto law = ts::random_law(gen);
    const auto d = ts::pair_from_law(law);
    const double pns = law[ts::cell(0, 0, 1)] + law[ts::cell(1, 0, 1)];
    const auto b = pns_bounds(d);
    EXPECT_LE(b.lb, pns + 1e-12);
    EXPECT_GE(b.ub, pns - 1e-12);
    EXPECT_GE(b.lb, 0.0);
    EXPECT_LE(b.ub, 1.0);
  }
}

TEST(PnsBounds, MonotoneInTreatedArm) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto d = ts::pair_from_law(ts::random_law(gen));
    auto prev = pns_bounds(d);
    for (int step = 0; step < 20; ++step) {
      d.p_yx = std::min(1.0, d.p_yx + 0.05 * u(gen));
      const auto cur = pns_bounds(d);
      EXPECT_GE(cur.lb, prev.lb);
      EXPECT_GE(cur.ub, prev.ub);
      prev = cur;
    }
  }
}

TEST(Identifiable, PointEstimates) {
  DistributionPair d;
  d.p_yx = 0.7;
  d.p_yxp = 0.2;
  d.obs = {0.3, 0.1, 0.1, 0.5};
  const auto p = identifiable_point_estimates(d);
  EXPECT_NEAR(p.pns, 0.5, 1e-15);
  EXPECT_NEAR(p.pn, (0.4 - 0.2) / 0.3, 1e-15);
  EXPECT_NEAR(p.ps, (0.7 - 0.4) / 0.5, 1e-15);
  d.p_yxp = d.p_yx;
  EXPECT_EQ(identifiable_point_estimates(d).pns, 0.0);
}

TEST(Consistency, UniformHasNoViolations) { EXPECT_TRUE(check_consistency(uniform_half()).ok()); }

TEST(Consistency, FlagsTreatedArmBelowObservedCell) {
  DistributionPair d;
  d.p_yx = 0.0;
  d.p_yxp = 0.5;
  d.obs = {0.3, 0.2, 0.25, 0.25};
  const auto r = check_consistency(d);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.violations.front().inequality, "P(x,y) <= P(y_x)");
  EXPECT_NEAR(r.violations.front().slack, -0.3, 1e-15);
}

TEST(Consistency, LawDerivedPairsAreCompatible) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 200; ++i) EXPECT_TRUE(check_consistency(ts::pair_from_law(ts::random_law(gen))).ok());
}

TEST(DistributionPair, ValidateRejectsBadJoint) {
  auto d = worked();
  d.obs.xy = 0.6;
  EXPECT_THROW(d.validate(), ValidationError);
  d = worked();
  d.p_yx = 1.2;
  EXPECT_THROW(d.validate(), ValidationError);
  EXPECT_NO_THROW(worked().validate());
}
