#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <thread>
#include <vector>

#include "pnsml/bounds.hpp"
#include "pnsml/error.hpp"
#include "pnsml/io.hpp"
#include "pnsml/scm.hpp"

namespace pnsml {

/// Packed values of the observable features: bit i holds Z_{i+1}, so Z_1 is
/// the least significant bit.
struct SubpopKey {
  std::uint32_t value = 0;

  static SubpopKey from_features(std::span<const Bit> z) {
    if (z.size() > 31) throw ValidationError("too many observed features for a key");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i]) v |= (1U << i);
    }
    return {v};
  }

  BitVector features(int n_observed) const {
    BitVector z(static_cast<std::size_t>(n_observed));
    for (int i = 0; i < n_observed; ++i) z[static_cast<std::size_t>(i)] = (value >> i) & 1U;
    return z;
  }

  bool operator==(const SubpopKey&) const = default;
  auto operator<=>(const SubpopKey&) const = default;
};

/// Exact distributions for one cell (full feature vector) or, after
/// marginalization, for one subpopulation.
struct CellDistributions {
  double p_y_do_x1 = 0.0;
  double p_y_do_x0 = 0.0;
  JointTable joint;
  double pns = 0.0;

  CellDistributions& add_scaled(double w, const CellDistributions& o) {
    p_y_do_x1 += w * o.p_y_do_x1;
    p_y_do_x0 += w * o.p_y_do_x0;
    joint.xy += w * o.joint.xy;
    joint.xyp += w * o.joint.xyp;
    joint.xpy += w * o.joint.xpy;
    joint.xpyp += w * o.joint.xpyp;
    pns += w * o.pns;
    return *this;
  }

  DistributionPair pair() const { return {p_y_do_x1, p_y_do_x0, joint}; }
};

/// PNS of a fully specified cell: P(U_Y=0) T_0 + P(U_Y=1) T_1 where T_u is
/// the indicator that Y flips from 0 under do(X=0) to 1 under do(X=1).
inline double cell_pns(const ScmSpec& spec, std::uint64_t z) {
  const double my = compute_my(z, spec);
  double pns = 0.0;
  for (Bit u = 0; u <= 1; ++u) {
    const double pu = u ? spec.p_uy : 1.0 - spec.p_uy;
    if (eval_fy(0, my, u, spec) == 0 && eval_fy(1, my, u, spec) == 1) pns += pu;
  }
  return pns;
}

inline double cell_experimental(const ScmSpec& spec, std::uint64_t z, Bit x) {
  const double my = compute_my(z, spec);
  return (1.0 - spec.p_uy) * eval_fy(x, my, 0, spec) + spec.p_uy * eval_fy(x, my, 1, spec);
}

/// Full observational joint P(X, Y | z), enumerating (U_X, U_Y).
inline JointTable cell_observational_joint(const ScmSpec& spec, std::uint64_t z) {
  const double mx = compute_mx(z, spec);
  const double my = compute_my(z, spec);
  JointTable t;
  for (Bit ux = 0; ux <= 1; ++ux) {
    const Bit x = eval_fx(mx, ux);
    const double px = ux ? spec.p_ux : 1.0 - spec.p_ux;
    for (Bit uy = 0; uy <= 1; ++uy) {
      const double w = px * (uy ? spec.p_uy : 1.0 - spec.p_uy);
      const Bit y = eval_fy(x, my, uy, spec);
      if (x && y) t.xy += w;
      else if (x) t.xyp += w;
      else if (y) t.xpy += w;
      else t.xpyp += w;
    }
  }
  return t;
}

inline CellDistributions cell_distributions(const ScmSpec& spec, std::uint64_t z) {
  return {cell_experimental(spec, z, 1), cell_experimental(spec, z, 0),
          cell_observational_joint(spec, z), cell_pns(spec, z)};
}

namespace detail {

inline std::uint64_t check_packable(std::span<const Bit> z, const ScmSpec& spec) {
  if (z.size() != static_cast<std::size_t>(spec.n_features)) {
    throw ValidationError("feature vector length does not match the model");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i]) v |= (std::uint64_t{1} << i);
  }
  return v;
}

}  // namespace detail

inline double cell_pns(const ScmSpec& spec, std::span<const Bit> z) {
  return cell_pns(spec, detail::check_packable(z, spec));
}

inline double cell_experimental(const ScmSpec& spec, std::span<const Bit> z, Bit x) {
  return cell_experimental(spec, detail::check_packable(z, spec), x);
}

inline JointTable cell_observational_joint(const ScmSpec& spec, std::span<const Bit> z) {
  return cell_observational_joint(spec, detail::check_packable(z, spec));
}

/// Completion s_i of key c: the unobserved features read as a big-endian
/// counter, so s_0 sets them all to 0, s_1 sets only the last feature, and
/// the final completion sets them all to 1.
inline std::uint64_t completion(const ScmSpec& spec, SubpopKey c, std::uint64_t i) {
  const int m = spec.n_unobserved();
  std::uint64_t z = c.value;
  for (int j = 0; j < m; ++j) {
    if ((i >> (m - 1 - j)) & 1U) z |= std::uint64_t{1} << (spec.n_observed + j);
  }
  return z;
}

/// P(s_i | c): product over the unobserved features of pz or 1 - pz.
inline double completion_weight(const ScmSpec& spec, std::uint64_t z) {
  double w = 1.0;
  for (int j = spec.n_observed; j < spec.n_features; ++j) {
    const double p = spec.pz[static_cast<std::size_t>(j)];
    w *= ((z >> j) & 1U) ? p : 1.0 - p;
  }
  return w;
}

/// Sum over the completions s_i of c of P(s_i | c) * cell_fn(s_i), with
/// cell_fn taking the packed full feature vector.
template <typename T, typename CellFn>
T subpop_marginalize(const ScmSpec& spec, SubpopKey c, CellFn&& cell_fn) {
  if (spec.n_unobserved() > 30) throw ResourceError("too many unobserved features to enumerate");
  const std::uint64_t count = std::uint64_t{1} << spec.n_unobserved();
  T acc{};
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto z = completion(spec, c, i);
    const double w = completion_weight(spec, z);
    if constexpr (std::is_arithmetic_v<T>) {
      acc += w * cell_fn(z);
    } else {
      acc.add_scaled(w, cell_fn(z));
    }
  }
  return acc;
}

inline CellDistributions subpop_distributions(const ScmSpec& spec, SubpopKey c) {
  return subpop_marginalize<CellDistributions>(
      spec, c, [&](std::uint64_t z) { return cell_distributions(spec, z); });
}

inline CausationBounds subpop_true_bounds(const ScmSpec& spec, SubpopKey c) {
  return pns_bounds(subpop_distributions(spec, c).pair());
}

struct InformerRow {
  SubpopKey key;
  CellDistributions dist;
  CausationBounds bounds;
};

struct InformerTable {
  int n_observed = 0;
  std::vector<InformerRow> rows;  ///< rows[k].key.value == k
};

inline constexpr std::size_t kDefaultInformerRowBudget = std::size_t{1} << 22;

/// Exact table for every subpopulation, ordered by key. Workers split the key
/// range; each row is computed independently, so the result does not depend
/// on the worker count.
inline InformerTable enumerate_informer(const ScmSpec& spec, unsigned workers = 1,
                                        std::size_t row_budget = kDefaultInformerRowBudget) {
  spec.validate();
  if (spec.n_observed > 30 || (std::size_t{1} << spec.n_observed) > row_budget) {
    throw ResourceError("informer table with 2^" + std::to_string(spec.n_observed) +
                        " rows exceeds the row budget");
  }
  const std::size_t n = std::size_t{1} << spec.n_observed;
  InformerTable table;
  table.n_observed = spec.n_observed;
  table.rows.resize(n);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const SubpopKey key{static_cast<std::uint32_t>(k)};
      const auto dist = subpop_distributions(spec, key);
      table.rows[k] = {key, dist, pns_bounds(dist.pair())};
    }
  };
  workers = std::clamp<unsigned>(workers, 1, 64);
  if (workers == 1) {
    fill(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = std::min(n, w * chunk), e = std::min(n, b + chunk);
      pool.emplace_back(fill, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return table;
}

inline std::string informer_csv(const InformerTable& t) {
  std::string out = "key";
  for (int i = 1; i <= t.n_observed; ++i) out += ",z" + std::to_string(i);
  out += ",p_y_do_x1,p_y_do_x0,p_x1y1,p_x1y0,p_x0y1,p_x0y0,pns,lb,ub\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.key.value);
    for (int i = 0; i < t.n_observed; ++i) out += ((r.key.value >> i) & 1U) ? ",1" : ",0";
    for (double v : {r.dist.p_y_do_x1, r.dist.p_y_do_x0, r.dist.joint.xy, r.dist.joint.xyp,
                     r.dist.joint.xpy, r.dist.joint.xpyp, r.dist.pns, r.bounds.lb, r.bounds.ub}) {
      out += ',';
      out += io::format_real(v);
    }
    out += '\n';
  }
  return out;
}

inline InformerTable parse_informer_csv(std::string_view text) {
  const auto ls = io::lines(text);
  if (ls.empty()) throw ValidationError("informer CSV is empty");
  const auto header = io::split(ls[0]);
  const int n_obs = static_cast<int>(header.size()) - 10;
  if (n_obs <= 0 || header[0] != "key") throw ValidationError("informer CSV header is malformed");
  InformerTable t;
  t.n_observed = n_obs;
  t.rows.reserve(ls.size() - 1);
  for (std::size_t li = 1; li < ls.size(); ++li) {
    if (ls[li].empty()) continue;
    const auto f = io::split(ls[li]);
    if (f.size() != header.size()) throw ValidationError("informer CSV row has wrong arity");
    InformerRow r;
    r.key.value = io::parse_int<std::uint32_t>(f[0]);
    const std::size_t b = 1 + static_cast<std::size_t>(n_obs);
    r.dist.p_y_do_x1 = io::parse_real(f[b]);
    r.dist.p_y_do_x0 = io::parse_real(f[b + 1]);
    r.dist.joint = {io::parse_real(f[b + 2]), io::parse_real(f[b + 3]), io::parse_real(f[b + 4]),
                    io::parse_real(f[b + 5])};
    r.dist.pns = io::parse_real(f[b + 6]);
    r.bounds = {Quantity::pns, io::parse_real(f[b + 7]), io::parse_real(f[b + 8]), true};
    r.bounds.consistent = r.bounds.lb <= r.bounds.ub + kFlagTolerance;
    if (r.key.value != t.rows.size()) throw ValidationError("informer CSV keys must be complete and ordered");
    t.rows.push_back(r);
  }
  if (t.rows.size() != (std::size_t{1} << n_obs)) throw ValidationError("informer CSV is incomplete");
  return t;
}

}  // namespace pnsml
