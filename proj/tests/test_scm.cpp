#include <gtest/gtest.h>

#include <random>

#include "pnsml/scm.hpp"
#include "support.hpp"

using namespace pnsml;

namespace {

BitVector unit_vector(int n, std::initializer_list<int> ones) {
  BitVector z(static_cast<std::size_t>(n), 0);
  for (int i : ones) z[static_cast<std::size_t>(i)] = 1;
  return z;
}

}  // namespace

TEST(ComputeMx, PublishedCoefficients) {
  const auto spec = paper_scm();
  EXPECT_EQ(compute_mx(unit_vector(20, {}), spec), 0.0);
  EXPECT_EQ(compute_mx(unit_vector(20, {0}), spec), 0.259223510143);
  EXPECT_NEAR(compute_mx(unit_vector(20, {0, 1}), spec), -0.398917479024, 1e-15);
}

TEST(ComputeMx, RejectsLengthMismatch) {
  EXPECT_THROW(compute_mx(unit_vector(19, {}), paper_scm()), ValidationError);
  EXPECT_THROW(compute_my(unit_vector(21, {}), paper_scm()), ValidationError);
}

TEST(ComputeMx, PackedAndBitVectorFormsAgree) {
  const auto spec = random_scm(5);
  std::mt19937_64 gen(1);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t packed = gen() & ((1ULL << 20) - 1);
    BitVector z(20);
    for (int i = 0; i < 20; ++i) z[static_cast<std::size_t>(i)] = (packed >> i) & 1;
    EXPECT_EQ(compute_mx(z, spec), compute_mx(packed, spec));
    EXPECT_EQ(compute_my(z, spec), compute_my(packed, spec));
  }
}

TEST(ComputeMx, LinearOnDisjointSupports) {
  const auto spec = paper_scm();
  std::mt19937_64 gen(2);
  for (int t = 0; t < 200; ++t) {
    const std::uint64_t a = gen() & 0xFFFFF;
    const std::uint64_t b = gen() & 0xFFFFF & ~a;
    EXPECT_NEAR(compute_mx(a | b, spec), compute_mx(a, spec) + compute_mx(b, spec), 1e-12);
    EXPECT_NEAR(compute_my(a | b, spec), compute_my(a, spec) + compute_my(b, spec), 1e-12);
  }
}

TEST(EvalFx, StrictThreshold) {
  EXPECT_EQ(eval_fx(0.6, 0), 1);
  EXPECT_EQ(eval_fx(0.5, 0), 0);
  EXPECT_EQ(eval_fx(-0.3, 1), 1);
  EXPECT_EQ(eval_fx(-0.5, 1), 0);
}

TEST(EvalFy, Examples) {
  EXPECT_EQ(eval_fy(0, -0.2, 0, 0.7), 0);
  EXPECT_EQ(eval_fy(1, -0.2, 0, 0.7), 1);
  EXPECT_EQ(eval_fy(0, -0.2, 1, 0.7), 1);
  EXPECT_EQ(eval_fy(1, -0.2, 1, 0.7), 1);  // v = 1.5 in (1, 2)
}

TEST(EvalFy, OpenIntervalsAtEveryBoundary) {
  for (double edge : {0.0, 1.0, 2.0}) {
    for (double eps : {1e-9, 1e-6, 1e-3}) {
      const double below = edge - eps, above = edge + eps;
      EXPECT_EQ(eval_fy(0, edge, 0, 0.0), 0) << edge;
      EXPECT_EQ(eval_fy(0, below, 0, 0.0), edge == 0.0 ? 0 : 1) << edge << " - " << eps;
      EXPECT_EQ(eval_fy(0, above, 0, 0.0), edge == 2.0 ? 0 : 1) << edge << " + " << eps;
    }
  }
}

TEST(EvalFy, FlippedUpperBranch) {
  EXPECT_EQ(eval_fy(1, -0.2, 1, 0.7, UpperBranch::zero), 0);
  EXPECT_EQ(eval_fy(1, -0.2, 0, 0.7, UpperBranch::zero), 1);
}

TEST(SimulateUnit, AllZeroExogenous) {
  const auto spec = paper_scm();
  ExogenousAssignment exo{BitVector(20, 0), 0, 0};
  const auto obs = simulate_unit(spec, exo, Regime::observational);
  EXPECT_EQ(obs.x, 0);
  EXPECT_EQ(obs.y, 0);
  EXPECT_EQ(obs.z, BitVector(20, 0));
  const auto treated = simulate_unit(spec, exo, Regime::do_x1);
  EXPECT_EQ(treated.x, 1);
  EXPECT_EQ(treated.y, 0);  // v = c_y = -0.7795...
  EXPECT_EQ(simulate_unit(spec, exo, Regime::do_x1), treated);
}

TEST(SimulateUnit, InterventionFixesTreatment) {
  const auto spec = random_scm(9);
  std::mt19937_64 gen(3);
  for (int t = 0; t < 300; ++t) {
    ExogenousAssignment exo{BitVector(20), static_cast<Bit>(gen() & 1), static_cast<Bit>(gen() & 1)};
    for (auto& b : exo.uz) b = gen() & 1;
    EXPECT_EQ(simulate_unit(spec, exo, Regime::do_x0).x, 0);
    EXPECT_EQ(simulate_unit(spec, exo, Regime::do_x1).x, 1);
    const auto o = simulate_unit(spec, exo, Regime::observational);
    EXPECT_EQ(o.z, exo.uz);
    EXPECT_EQ(o.x, eval_fx(compute_mx(exo.uz, spec), exo.ux));
  }
}

TEST(SimulateUnit, RejectsWrongLength) {
  ExogenousAssignment exo{BitVector(3, 0), 0, 0};
  EXPECT_THROW(simulate_unit(paper_scm(), exo, Regime::observational), ValidationError);
}

TEST(PublishedScm, Constants) {
  const auto s = paper_scm();
  EXPECT_EQ(s.n_features, 20);
  EXPECT_EQ(s.n_observed, 15);
  EXPECT_EQ(s.c_y, -0.77953605542);
  EXPECT_EQ(s.pz[0], 0.352913861526);
  EXPECT_EQ(s.p_uy, 0.497668975278);
  EXPECT_EQ(s.p_ux, 0.601680857267);
  EXPECT_NO_THROW(s.validate());
}

TEST(RandomScm, DeterministicAndInRange) {
  const auto a = random_scm(42), b = random_scm(42), c = random_scm(43);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_NE(to_json(a), to_json(c));
  for (double v : a.mx_coeffs) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
  for (double v : a.my_coeffs) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
  for (double p : a.pz) EXPECT_TRUE(p >= 0.0 && p <= 1.0);
  EXPECT_TRUE(a.c_y >= -1.0 && a.c_y <= 1.0);
}

TEST(RandomScm, RejectsInvalidRanges) {
  EXPECT_THROW(random_scm(1, {1.0, -1.0}), ValidationError);
  EXPECT_THROW(random_scm(1, {-1.0, 1.0}, {-0.1, 1.0}), ValidationError);
  EXPECT_THROW(random_scm(1, {-1.0, 1.0}, {0.0, 1.5}), ValidationError);
}

TEST(ScmJson, RoundTripIsExact) {
  for (const auto& spec : {paper_scm(), random_scm(77), random_scm(3, {-5, 5}, {0.1, 0.2}, 8, 3)}) {
    const auto text = to_json(spec).dump();
    const auto back = scm_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back.mx_coeffs, spec.mx_coeffs);
    EXPECT_EQ(back.my_coeffs, spec.my_coeffs);
    EXPECT_EQ(back.pz, spec.pz);
    EXPECT_EQ(back.c_y, spec.c_y);
    EXPECT_EQ(back.p_ux, spec.p_ux);
    EXPECT_EQ(back.p_uy, spec.p_uy);
    EXPECT_EQ(back.seed, spec.seed);
    EXPECT_EQ(to_json(back).dump(), text);
    EXPECT_EQ(scm_hash(back), scm_hash(spec));
  }
}

TEST(ScmJson, MetaCarriesProvenance) {
  const auto j = to_json(random_scm(5));
  EXPECT_EQ(j["meta"]["seed"], 5);
  EXPECT_EQ(j["meta"]["generator_version"], "random-scm/1");
  EXPECT_TRUE(to_json(paper_scm())["meta"]["seed"].is_null());
}

TEST(ScmJson, RejectsMalformedDocuments) {
  auto j = to_json(paper_scm());
  j["pz"][0] = 1.5;
  EXPECT_THROW(scm_from_json(j), ValidationError);
  j = to_json(paper_scm());
  j.erase("c_y");
  EXPECT_THROW(scm_from_json(j), ValidationError);
  j = to_json(paper_scm());
  j["n_observed"] = 21;
  EXPECT_THROW(scm_from_json(j), ValidationError);
}

TEST(ScmHash, IgnoresProvenanceButNotParameters) {
  auto a = paper_scm();
  auto b = a;
  b.seed = 12;
  b.generator_version = "other";
  EXPECT_EQ(scm_hash(a), scm_hash(b));
  b.c_y += 1e-12;
  EXPECT_NE(scm_hash(a), scm_hash(b));
  auto c = a;
  c.upper_branch = UpperBranch::zero;
  EXPECT_NE(scm_hash(a), scm_hash(c));
}
