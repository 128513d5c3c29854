#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pnsml/error.hpp"
#include "pnsml/hash.hpp"
#include "pnsml/rng.hpp"

namespace pnsml {

using Bit = std::uint8_t;
using BitVector = std::vector<Bit>;

/// Value f_Y assigns when C_Y*X + M_Y + U_Y falls in (1, 2). The published
/// mechanism assigns 1 there as well as on (0, 1); `zero` flips that branch.
enum class UpperBranch : std::uint8_t { one, zero };

/// Parameterization of the structural model
///
///   Z_i = U_{Z_i}
///   X   = 1[M_X + U_X > 0.5]
///   Y   = 1[0 < C_Y X + M_Y + U_Y < 1] or 1[1 < C_Y X + M_Y + U_Y < 2]
///
/// with M_X, M_Y linear in Z and all U binary. The first `n_observed`
/// features are the observable ones.
struct ScmSpec {
  int n_features = 0;
  int n_observed = 0;
  std::vector<double> mx_coeffs;
  std::vector<double> my_coeffs;
  double c_y = 0.0;
  std::vector<double> pz;
  double p_ux = 0.0;
  double p_uy = 0.0;
  UpperBranch upper_branch = UpperBranch::one;

  // Provenance only; not part of the model identity.
  std::optional<std::uint64_t> seed;
  std::string generator_version;

  int n_unobserved() const noexcept { return n_features - n_observed; }

  void validate() const {
    if (n_features <= 0 || n_features > 64) {
      throw ValidationError("n_features must be in [1, 64]");
    }
    if (n_observed <= 0 || n_observed > n_features) {
      throw ValidationError("n_observed must be in [1, n_features]");
    }
    const auto n = static_cast<std::size_t>(n_features);
    if (mx_coeffs.size() != n || my_coeffs.size() != n || pz.size() != n) {
      throw ValidationError("mx_coeffs, my_coeffs and pz must have n_features entries");
    }
    auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!std::all_of(pz.begin(), pz.end(), is_prob) || !is_prob(p_ux) || !is_prob(p_uy)) {
      throw ValidationError("exogenous Bernoulli parameters must lie in [0, 1]");
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(mx_coeffs.begin(), mx_coeffs.end(), finite) ||
        !std::all_of(my_coeffs.begin(), my_coeffs.end(), finite) || !std::isfinite(c_y)) {
      throw ValidationError("coefficients must be finite");
    }
  }
};

struct ExogenousAssignment {
  BitVector uz;
  Bit ux = 0;
  Bit uy = 0;
};

enum class Regime : std::uint8_t { observational, do_x0, do_x1 };

struct UnitOutcome {
  BitVector z;
  Bit x = 0;
  Bit y = 0;
  Regime regime = Regime::observational;

  bool operator==(const UnitOutcome&) const = default;
};

namespace detail {

inline double dot_bits(std::span<const Bit> z, const std::vector<double>& coeffs) {
  if (z.size() != coeffs.size()) {
    throw ValidationError("feature vector length does not match the model");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) acc += coeffs[i] * static_cast<double>(z[i] != 0);
  return acc;
}

/// Same sum for a packed vector (bit i = Z_{i+1}). Terms are added in index
/// order, branch-free, so the result is bit-identical to dot_bits.
inline double dot_packed(std::uint64_t z, const std::vector<double>& coeffs) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) acc += coeffs[i] * static_cast<double>((z >> i) & 1U);
  return acc;
}

}  // namespace detail

inline double compute_mx(std::span<const Bit> z, const ScmSpec& spec) {
  return detail::dot_bits(z, spec.mx_coeffs);
}

inline double compute_my(std::span<const Bit> z, const ScmSpec& spec) {
  return detail::dot_bits(z, spec.my_coeffs);
}

inline double compute_mx(std::uint64_t packed_z, const ScmSpec& spec) noexcept {
  return detail::dot_packed(packed_z, spec.mx_coeffs);
}

inline double compute_my(std::uint64_t packed_z, const ScmSpec& spec) noexcept {
  return detail::dot_packed(packed_z, spec.my_coeffs);
}

constexpr Bit eval_fx(double mx_val, Bit u_x) noexcept { return (mx_val + u_x > 0.5) ? 1 : 0; }

constexpr Bit eval_fy(Bit x, double my_val, Bit u_y, double c_y,
                      UpperBranch upper = UpperBranch::one) noexcept {
  const double v = c_y * x + my_val + u_y;
  if (v > 0.0 && v < 1.0) return 1;
  if (v > 1.0 && v < 2.0) return upper == UpperBranch::one ? 1 : 0;
  return 0;
}

inline Bit eval_fy(Bit x, double my_val, Bit u_y, const ScmSpec& spec) noexcept {
  return eval_fy(x, my_val, u_y, spec.c_y, spec.upper_branch);
}

inline UnitOutcome simulate_unit(const ScmSpec& spec, const ExogenousAssignment& exo, Regime regime) {
  if (exo.uz.size() != static_cast<std::size_t>(spec.n_features)) {
    throw ValidationError("exogenous assignment length does not match the model");
  }
  UnitOutcome out;
  out.z = exo.uz;
  out.regime = regime;
  switch (regime) {
    case Regime::observational: out.x = eval_fx(compute_mx(out.z, spec), exo.ux); break;
    case Regime::do_x0: out.x = 0; break;
    case Regime::do_x1: out.x = 1; break;
  }
  out.y = eval_fy(out.x, compute_my(out.z, spec), exo.uy, spec);
  return out;
}

struct Range {
  double lo;
  double hi;
};

inline constexpr std::string_view kRandomScmVersion = "random-scm/1";

/// Draws a model with coefficients (M_X, M_Y and C_Y) uniform on
/// `coeff_range` and Bernoulli parameters uniform on `prob_range`.
inline ScmSpec random_scm(std::uint64_t seed, Range coeff_range = {-1.0, 1.0},
                          Range prob_range = {0.0, 1.0}, int n_features = 20, int n_observed = 15) {
  auto bad = [](Range r) { return !std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi; };
  if (bad(coeff_range)) throw ValidationError("invalid coefficient range");
  if (bad(prob_range) || prob_range.lo < 0.0 || prob_range.hi > 1.0) {
    throw ValidationError("invalid probability range");
  }
  ScmSpec spec;
  spec.n_features = n_features;
  spec.n_observed = n_observed;
  spec.seed = seed;
  spec.generator_version = std::string(kRandomScmVersion);
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(n_features);
  spec.mx_coeffs.resize(n);
  spec.my_coeffs.resize(n);
  spec.pz.resize(n);
  for (auto& c : spec.mx_coeffs) c = rng.uniform(coeff_range.lo, coeff_range.hi);
  for (auto& c : spec.my_coeffs) c = rng.uniform(coeff_range.lo, coeff_range.hi);
  spec.c_y = rng.uniform(coeff_range.lo, coeff_range.hi);
  for (auto& p : spec.pz) p = rng.uniform(prob_range.lo, prob_range.hi);
  spec.p_ux = rng.uniform(prob_range.lo, prob_range.hi);
  spec.p_uy = rng.uniform(prob_range.lo, prob_range.hi);
  spec.validate();
  return spec;
}

inline constexpr std::string_view kPaperScmVersion = "published-constants/1";

/// The 20-feature benchmark model (15 observed) with its published constants.
inline ScmSpec paper_scm() {
  ScmSpec spec;
  spec.n_features = 20;
  spec.n_observed = 15;
  spec.mx_coeffs = {0.259223510143,  -0.658140989167, -0.75025831768,  0.162906462426,
                    0.652023463285,  -0.0892939586541, 0.421469107769, -0.443129684766,
                    0.802624388789,  -0.225740978499, 0.716621631717,  0.0650682260309,
                    -0.220690334026, 0.156355773665,  -0.50693672491,  -0.707060278115,
                    0.418812816935,  -0.0822118703986, 0.769299853833, -0.511585391002};
  spec.my_coeffs = {-0.792867111918, 0.759967136147,  0.55437722369,    0.503970540409,
                    -0.527187144651, 0.378619988091,  0.269255196301,   0.671597043594,
                    0.396010142274,  0.325228576643,  0.657808327574,   0.801655023993,
                    0.0907679484097, -0.0713852594543, -0.0691046005285, -0.222582013343,
                    -0.848408031595, -0.584285069026, -0.324874831799,  0.625621583197};
  spec.pz = {0.352913861526, 0.460995855543, 0.331702473392, 0.885505026779, 0.017026872706,
             0.380772701708, 0.028092602705, 0.220819399962, 0.617742227477, 0.981975046713,
             0.142042291381, 0.833602592350, 0.882938907115, 0.542143191999, 0.085023436884,
             0.645357252864, 0.863787135134, 0.460539711624, 0.314014079207, 0.685879388218};
  spec.p_ux = 0.601680857267;
  spec.p_uy = 0.497668975278;
  spec.c_y = -0.77953605542;
  spec.generator_version = std::string(kPaperScmVersion);
  return spec;
}

// --- serialization -------------------------------------------------------

/// JSON without provenance: the identity that hashes and comparisons use.
inline nlohmann::json model_identity_json(const ScmSpec& s) {
  nlohmann::json j;
  j["n_features"] = s.n_features;
  j["n_observed"] = s.n_observed;
  j["mx_coeffs"] = s.mx_coeffs;
  j["my_coeffs"] = s.my_coeffs;
  j["c_y"] = s.c_y;
  j["pz"] = s.pz;
  j["p_ux"] = s.p_ux;
  j["p_uy"] = s.p_uy;
  if (s.upper_branch == UpperBranch::zero) j["fy_upper_branch"] = 0;
  return j;
}

inline nlohmann::json to_json(const ScmSpec& s) {
  auto j = model_identity_json(s);
  j["meta"] = {{"seed", s.seed ? nlohmann::json(*s.seed) : nlohmann::json(nullptr)},
               {"generator_version", s.generator_version}};
  return j;
}

inline ScmSpec scm_from_json(const nlohmann::json& j) {
  ScmSpec s;
  try {
    s.n_features = j.at("n_features").get<int>();
    s.n_observed = j.at("n_observed").get<int>();
    s.mx_coeffs = j.at("mx_coeffs").get<std::vector<double>>();
    s.my_coeffs = j.at("my_coeffs").get<std::vector<double>>();
    s.c_y = j.at("c_y").get<double>();
    s.pz = j.at("pz").get<std::vector<double>>();
    s.p_ux = j.at("p_ux").get<double>();
    s.p_uy = j.at("p_uy").get<double>();
    if (j.contains("fy_upper_branch")) {
      s.upper_branch = j.at("fy_upper_branch").get<int>() == 0 ? UpperBranch::zero : UpperBranch::one;
    }
    if (j.contains("meta")) {
      const auto& m = j.at("meta");
      if (m.contains("seed") && !m.at("seed").is_null()) s.seed = m.at("seed").get<std::uint64_t>();
      if (m.contains("generator_version")) s.generator_version = m.at("generator_version").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed SCM document: ") + e.what());
  }
  s.validate();
  return s;
}

/// SHA-256 of the canonical identity JSON.
inline std::string scm_hash(const ScmSpec& s) { return sha256_hex(model_identity_json(s).dump()); }

}  // namespace pnsml
