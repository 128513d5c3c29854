#include <gtest/gtest.h>

#include "pnsml/informer.hpp"
#include "support.hpp"

using namespace pnsml;
namespace ts = testing_support;

namespace {

// M_Y(z) = -0.2 whenever Z1 = 1; c_y = 0.7, P(U_Y = 1) = 0.3.
ScmSpec hand_spec() {
  auto s = ts::toy_spec(3, 2);
  s.my_coeffs[0] = -0.2;
  return s;
}

// Exhaustive expectation over the unobserved U_Z, U_X and U_Y, evaluating the
// structural equations directly through simulate_unit.
CellDistributions brute_force(const ScmSpec& spec, SubpopKey c) {
  CellDistributions acc;
  const int m = spec.n_unobserved();
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << (m + 2)); ++bits) {
    ExogenousAssignment exo;
    exo.uz.assign(static_cast<std::size_t>(spec.n_features), 0);
    double w = 1.0;
    for (int i = 0; i < spec.n_observed; ++i) exo.uz[static_cast<std::size_t>(i)] = (c.value >> i) & 1U;
    for (int j = 0; j < m; ++j) {
      const Bit b = (bits >> j) & 1U;
      const auto idx = static_cast<std::size_t>(spec.n_observed + j);
      exo.uz[idx] = b;
      w *= b ? spec.pz[idx] : 1.0 - spec.pz[idx];
    }
    exo.ux = (bits >> m) & 1U;
    exo.uy = (bits >> (m + 1)) & 1U;
    w *= (exo.ux ? spec.p_ux : 1.0 - spec.p_ux) * (exo.uy ? spec.p_uy : 1.0 - spec.p_uy);
    const auto y0 = simulate_unit(spec, exo, Regime::do_x0).y;
    const auto y1 = simulate_unit(spec, exo, Regime::do_x1).y;
    const auto o = simulate_unit(spec, exo, Regime::observational);
    acc.p_y_do_x1 += w * y1;
    acc.p_y_do_x0 += w * y0;
    acc.pns += w * (y1 == 1 && y0 == 0);
    if (o.x && o.y) acc.joint.xy += w;
    if (o.x && !o.y) acc.joint.xyp += w;
    if (!o.x && o.y) acc.joint.xpy += w;
    if (!o.x && !o.y) acc.joint.xpyp += w;
  }
  return acc;
}

}  // namespace

TEST(SubpopKey, LittleEndianBijection) {
  const BitVector z{1, 0, 1, 1};
  const auto k = SubpopKey::from_features(z);
  EXPECT_EQ(k.value, 0b1101U);
  EXPECT_EQ(k.features(4), z);
  for (std::uint32_t v = 0; v < 64; ++v) EXPECT_EQ(SubpopKey::from_features(SubpopKey{v}.features(6)).value, v);
}

TEST(CellPns, HandExample) {
  const auto s = hand_spec();
  EXPECT_NEAR(cell_pns(s, std::uint64_t{0b001}), 0.7, 1e-15);
  EXPECT_EQ(cell_experimental(s, std::uint64_t{0b001}, 1), 1.0);
  EXPECT_NEAR(cell_experimental(s, std::uint64_t{0b001}, 0), 0.3, 1e-15);
}

TEST(CellPns, ZeroTreatmentCoefficientMeansZero) {
  auto s = random_scm(4);
  s.c_y = 0.0;
  for (std::uint64_t z = 0; z < 1024; z += 7) EXPECT_EQ(cell_pns(s, z), 0.0);
}

TEST(CellPns, BoundedByArms) {
  const auto s = paper_scm();
  for (std::uint64_t z = 0; z < (1U << 20); z += 997) {
    const auto d = cell_distributions(s, z);
    EXPECT_GE(d.pns, 0.0);
    EXPECT_LE(d.pns, std::min(d.p_y_do_x1, 1.0 - d.p_y_do_x0) + 1e-15);
    EXPECT_NEAR(d.joint.total(), 1.0, 1e-12);
  }
}

TEST(CellExperimental, DegenerateNoise) {
  auto s = hand_spec();
  s.p_uy = 0.0;
  for (std::uint64_t z = 0; z < 8; ++z) {
    for (Bit x : {Bit{0}, Bit{1}}) EXPECT_EQ(cell_experimental(s, z, x), eval_fy(x, compute_my(z, s), 0, s));
  }
}

TEST(CellObservational, MatchesFourTermOutcomeProbability) {
  const auto s = paper_scm();
  for (std::uint64_t z = 0; z < (1U << 20); z += 4099) {
    const auto j = cell_observational_joint(s, z);
    const double mx = compute_mx(z, s), my = compute_my(z, s);
    double py = 0.0;
    for (Bit ux : {Bit{0}, Bit{1}}) {
      for (Bit uy : {Bit{0}, Bit{1}}) {
        py += (ux ? s.p_ux : 1 - s.p_ux) * (uy ? s.p_uy : 1 - s.p_uy) * eval_fy(eval_fx(mx, ux), my, uy, s);
      }
    }
    EXPECT_NEAR(j.xy + j.xpy, py, 1e-15);
  }
}

TEST(CellObservational, DegenerateNoisePutsAllMassInOneCell) {
  auto s = hand_spec();
  s.p_ux = 1.0;
  s.p_uy = 1.0;
  const auto j = cell_observational_joint(s, std::uint64_t{0});
  const std::array<double, 4> cells{j.xy, j.xyp, j.xpy, j.xpyp};
  EXPECT_EQ(std::count(cells.begin(), cells.end(), 1.0), 1);
  EXPECT_EQ(std::count(cells.begin(), cells.end(), 0.0), 3);
}

TEST(CellFunctions, SpanOverloadsCheckLength) {
  const auto s = hand_spec();
  const BitVector ok{1, 0, 0}, bad{1, 0};
  EXPECT_EQ(cell_pns(s, ok), cell_pns(s, std::uint64_t{1}));
  EXPECT_THROW(cell_pns(s, bad), ValidationError);
  EXPECT_THROW(cell_experimental(s, bad, 1), ValidationError);
  EXPECT_THROW(cell_observational_joint(s, bad), ValidationError);
}

TEST(SubpopMarginalize, WeightsSumToOne) {
  const auto s = paper_scm();
  for (std::uint32_t c = 0; c < 32768; c += 1021) {
    EXPECT_NEAR(subpop_marginalize<double>(s, SubpopKey{c}, [](std::uint64_t) { return 1.0; }), 1.0, 1e-14);
  }
}

TEST(SubpopMarginalize, DegenerateWeightsPickAllZeroCompletion) {
  auto s = paper_scm();
  for (int j = 15; j < 20; ++j) s.pz[static_cast<std::size_t>(j)] = 0.0;
  for (std::uint32_t c = 0; c < 32768; c += 2039) {
    EXPECT_EQ(subpop_marginalize<double>(s, SubpopKey{c}, [&](std::uint64_t z) { return cell_pns(s, z); }),
              cell_pns(s, std::uint64_t{c}));
  }
}

TEST(SubpopDistributions, MatchExhaustiveEnumeration) {
  for (const auto& s : {paper_scm(), random_scm(8), random_scm(9)}) {
    for (std::uint32_t c = 0; c < 32768; c += 331) {
      const auto got = subpop_distributions(s, SubpopKey{c});
      const auto want = brute_force(s, SubpopKey{c});
      EXPECT_NEAR(got.pns, want.pns, 1e-14);
      EXPECT_NEAR(got.p_y_do_x1, want.p_y_do_x1, 1e-14);
      EXPECT_NEAR(got.p_y_do_x0, want.p_y_do_x0, 1e-14);
      EXPECT_NEAR(got.joint.xy, want.joint.xy, 1e-14);
      EXPECT_NEAR(got.joint.xyp, want.joint.xyp, 1e-14);
      EXPECT_NEAR(got.joint.xpy, want.joint.xpy, 1e-14);
      EXPECT_NEAR(got.joint.xpyp, want.joint.xpyp, 1e-14);
    }
  }
}

TEST(SubpopTrueBounds, DeterministicModelPinsPns) {
  auto s = paper_scm();
  for (auto& p : s.pz) p = p < 0.5 ? 0.0 : 1.0;
  s.p_ux = 1.0;
  s.p_uy = 0.0;
  for (std::uint32_t c = 0; c < 32768; c += 97) {
    const auto b = subpop_true_bounds(s, SubpopKey{c});
    const double pns = subpop_distributions(s, SubpopKey{c}).pns;
    EXPECT_EQ(b.lb, pns);
    EXPECT_EQ(b.ub, pns);
  }
}

TEST(EnumerateInformer, PublishedTableIsCompleteAndBracketsPns) {
  const auto t = enumerate_informer(paper_scm());
  ASSERT_EQ(t.rows.size(), 32768U);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    ASSERT_EQ(r.key.value, i);
    violations += !(r.bounds.lb <= r.dist.pns + 1e-12 && r.dist.pns <= r.bounds.ub + 1e-12);
    EXPECT_GE(r.bounds.lb, 0.0);
    EXPECT_LE(r.bounds.ub, 1.0);
    EXPECT_TRUE(check_consistency(r.dist.pair()).ok());
  }
  EXPECT_EQ(violations, 0U);
}

TEST(EnumerateInformer, WorkerCountDoesNotMatter) {
  const auto s = random_scm(21, {-1, 1}, {0, 1}, 14, 10);
  EXPECT_EQ(informer_csv(enumerate_informer(s, 1)), informer_csv(enumerate_informer(s, 3)));
}

TEST(EnumerateInformer, ToyTableHasEightRows) {
  EXPECT_EQ(enumerate_informer(ts::toy_spec(5, 3)).rows.size(), 8U);
}

TEST(EnumerateInformer, RowBudgetIsEnforced) {
  EXPECT_THROW(enumerate_informer(paper_scm(), 1, 1000), ResourceError);
}

TEST(InformerCsv, RoundTripIsByteIdentical) {
  const auto t = enumerate_informer(random_scm(2, {-1, 1}, {0, 1}, 9, 6));
  const auto text = informer_csv(t);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "key,z1,z2,z3,z4,z5,z6,p_y_do_x1,p_y_do_x0,p_x1y1,p_x1y0,p_x0y1,p_x0y0,pns,lb,ub");
  const auto back = parse_informer_csv(text);
  EXPECT_EQ(informer_csv(back), text);
  EXPECT_EQ(back.rows[5].bounds.lb, t.rows[5].bounds.lb);
}

TEST(InformerCsv, RejectsIncompleteTables) {
  auto text = informer_csv(enumerate_informer(ts::toy_spec(4, 2)));
  text.erase(text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(parse_informer_csv(text), ValidationError);
}
