#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pnsml/bounds.hpp"
#include "pnsml/error.hpp"
#include "pnsml/informer.hpp"
#include "pnsml/io.hpp"
#include "pnsml/rng.hpp"
#include "pnsml/scm.hpp"

namespace pnsml {

inline constexpr std::string_view kDatagenVersion = "pnsml-datagen/1";

enum class SampleRegime : std::uint8_t { experimental, observational };

inline const char* to_string(SampleRegime r) {
  return r == SampleRegime::experimental ? "exp" : "obs";
}

/// Counts indexed by 2*x + y.
using Counts2x2 = std::array<std::uint64_t, 4>;

inline constexpr std::uint64_t total(const Counts2x2& c) noexcept { return c[0] + c[1] + c[2] + c[3]; }

/// Sufficient statistics of the generated samples: one 2x2 table of (x, y)
/// counts per subpopulation key and regime.
struct SampleCounters {
  int n_observed = 0;
  std::string spec_hash;
  std::vector<Counts2x2> exp;
  std::vector<Counts2x2> obs;

  static SampleCounters zeros(int n_observed, std::string spec_hash) {
    SampleCounters c;
    c.n_observed = n_observed;
    c.spec_hash = std::move(spec_hash);
    c.exp.assign(std::size_t{1} << n_observed, Counts2x2{});
    c.obs.assign(std::size_t{1} << n_observed, Counts2x2{});
    return c;
  }

  std::vector<Counts2x2>& side(SampleRegime r) { return r == SampleRegime::experimental ? exp : obs; }
  const std::vector<Counts2x2>& side(SampleRegime r) const {
    return r == SampleRegime::experimental ? exp : obs;
  }

  std::uint64_t total(SampleRegime r) const {
    std::uint64_t t = 0;
    for (const auto& c : side(r)) t += pnsml::total(c);
    return t;
  }

  bool operator==(const SampleCounters&) const = default;
};

/// One generated unit, as recorded: observable key plus (x, y).
struct RawSample {
  std::uint64_t index;
  SubpopKey key;
  Bit x;
  Bit y;
};

namespace detail {

struct PreparedSpec {
  std::vector<BernoulliThreshold> uz;
  BernoulliThreshold ux, uy;
  std::uint32_t key_mask;
};

inline PreparedSpec prepare(const ScmSpec& spec) {
  PreparedSpec p;
  for (double q : spec.pz) p.uz.push_back(BernoulliThreshold::from(q));
  p.ux = BernoulliThreshold::from(spec.p_ux);
  p.uy = BernoulliThreshold::from(spec.p_uy);
  p.key_mask = static_cast<std::uint32_t>((std::uint64_t{1} << spec.n_observed) - 1);
  return p;
}

/// Draw order per sample: U_{Z_1..Z_n}, U_X, U_Y, then (experimental only)
/// the randomized treatment from the top bit of the next word.
inline RawSample draw_sample(const ScmSpec& spec, const PreparedSpec& p, std::uint64_t stream_key,
                             std::uint64_t index, SampleRegime regime) {
  CounterStream s(stream_key, index);
  std::uint64_t z = 0;
  for (std::size_t i = 0; i < p.uz.size(); ++i) {
    z |= static_cast<std::uint64_t>(p.uz[i].test(s.next())) << i;
  }
  const Bit ux = p.ux.test(s.next()) ? 1 : 0;
  const Bit uy = p.uy.test(s.next()) ? 1 : 0;
  Bit x;
  if (regime == SampleRegime::experimental) {
    x = static_cast<Bit>(s.next() >> 63);
  } else {
    x = eval_fx(compute_mx(z, spec), ux);
  }
  const Bit y = eval_fy(x, compute_my(z, spec), uy, spec);
  return {index, SubpopKey{static_cast<std::uint32_t>(z & p.key_mask)}, x, y};
}

}  // namespace detail

inline std::uint64_t regime_stream_key(std::uint64_t seed, SampleRegime r) {
  return derive_seed(seed, r == SampleRegime::experimental ? "experimental" : "observational");
}

/// Simulates `n_samples` units under `regime` and tallies them per key. The
/// unobserved features are drawn but never recorded. Sample i always uses
/// counter stream i, so the result is identical for every worker count.
/// `raw_sink`, when given, receives every sample in index order and forces a
/// single worker.
inline SampleCounters generate_counters(const ScmSpec& spec, std::uint64_t n_samples, SampleRegime regime,
                                        std::uint64_t seed, unsigned workers = 1,
                                        const std::function<void(const RawSample&)>& raw_sink = {}) {
  spec.validate();
  if (spec.n_observed > 26) throw ResourceError("too many observed features for dense counters");
  auto counters = SampleCounters::zeros(spec.n_observed, scm_hash(spec));
  const auto prepared = detail::prepare(spec);
  const auto key = regime_stream_key(seed, regime);
  if (raw_sink) workers = 1;
  workers = std::clamp<unsigned>(workers, 1, 64);
  if (n_samples < workers) workers = 1;

  auto run = [&](std::uint64_t begin, std::uint64_t end, std::vector<Counts2x2>& out) {
    for (std::uint64_t i = begin; i < end; ++i) {
      const auto s = detail::draw_sample(spec, prepared, key, i, regime);
      ++out[s.key.value][2 * s.x + s.y];
      if (raw_sink) raw_sink(s);
    }
  };

  auto& dest = counters.side(regime);
  if (workers == 1) {
    run(0, n_samples, dest);
    return counters;
  }
  std::vector<std::vector<Counts2x2>> partial(workers, std::vector<Counts2x2>(dest.size()));
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (n_samples + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t b = std::min(n_samples, w * chunk), e = std::min(n_samples, b + chunk);
    pool.emplace_back(run, b, e, std::ref(partial[w]));
  }
  for (auto& t : pool) t.join();
  for (const auto& part : partial) {
    for (std::size_t k = 0; k < dest.size(); ++k) {
      for (int c = 0; c < 4; ++c) dest[k][c] += part[k][c];
    }
  }
  return counters;
}

/// Cellwise sum. Both operands must come from the same model.
inline SampleCounters merge_counters(const SampleCounters& a, const SampleCounters& b) {
  if (a.spec_hash != b.spec_hash || a.n_observed != b.n_observed) {
    throw ValidationError("cannot merge counters from different models");
  }
  SampleCounters out = a;
  for (std::size_t k = 0; k < out.exp.size(); ++k) {
    for (int c = 0; c < 4; ++c) {
      out.exp[k][c] += b.exp[k][c];
      out.obs[k][c] += b.obs[k][c];
    }
  }
  return out;
}

/// Plug-in estimates for one key. Throws ValidationError when either
/// experimental arm or the observational table is empty.
inline DistributionPair estimate_distributions(const SampleCounters& c, SubpopKey key) {
  if (key.value >= c.exp.size()) throw ValidationError("key out of range");
  const auto& e = c.exp[key.value];
  const auto& o = c.obs[key.value];
  const std::uint64_t arm1 = e[2] + e[3], arm0 = e[0] + e[1], n_obs = total(o);
  if (arm1 == 0 || arm0 == 0) throw ValidationError("experimental arm without samples");
  if (n_obs == 0) throw ValidationError("no observational samples");
  DistributionPair d;
  d.p_yx = static_cast<double>(e[3]) / static_cast<double>(arm1);
  d.p_yxp = static_cast<double>(e[1]) / static_cast<double>(arm0);
  const double n = static_cast<double>(n_obs);
  d.obs = {static_cast<double>(o[3]) / n, static_cast<double>(o[2]) / n, static_cast<double>(o[1]) / n,
           static_cast<double>(o[0]) / n};
  return d;
}

struct LabeledRecord {
  SubpopKey key;
  double lb = 0.0;
  double ub = 0.0;
  std::uint64_t n_exp = 0;
  std::uint64_t n_obs = 0;
  bool consistent = true;
};

struct DatasetMeta {
  std::string scm_hash;
  std::uint64_t seed = 0;
  std::uint64_t threshold = 0;
  std::uint64_t n_exp_total = 0;
  std::uint64_t n_obs_total = 0;
  std::string generator_version = std::string(kDatagenVersion);
  std::string prng = std::string(CounterStream::kAlgorithm);
};

struct Dataset {
  int n_observed = 0;
  std::vector<LabeledRecord> records;  ///< ascending key order
  DatasetMeta meta;

  std::size_t size() const noexcept { return records.size(); }
};

inline constexpr std::uint64_t kDefaultThreshold = 1300;

/// Keeps every key with at least `threshold` samples in both regimes and both
/// experimental arms non-empty, labelled with the PNS bounds of its estimated
/// distributions. Inconsistent bounds are kept and flagged.
inline Dataset build_dataset(const SampleCounters& c, std::uint64_t threshold, std::uint64_t seed = 0) {
  if (threshold < 1) throw ValidationError("threshold must be at least 1");
  Dataset d;
  d.n_observed = c.n_observed;
  d.meta.scm_hash = c.spec_hash;
  d.meta.seed = seed;
  d.meta.threshold = threshold;
  d.meta.n_exp_total = c.total(SampleRegime::experimental);
  d.meta.n_obs_total = c.total(SampleRegime::observational);
  for (std::size_t k = 0; k < c.exp.size(); ++k) {
    const auto n_exp = total(c.exp[k]), n_obs = total(c.obs[k]);
    if (n_exp < threshold || n_obs < threshold) continue;
    const auto& e = c.exp[k];
    if (e[0] + e[1] == 0 || e[2] + e[3] == 0) continue;
    const SubpopKey key{static_cast<std::uint32_t>(k)};
    const auto b = pns_bounds(estimate_distributions(c, key));
    d.records.push_back({key, b.lb, b.ub, n_exp, n_obs, b.consistent});
  }
  return d;
}

// --- file formats --------------------------------------------------------

inline std::string counters_csv(const SampleCounters& c) {
  std::string out = "key,regime,x,y,count\n";
  for (auto r : {SampleRegime::experimental, SampleRegime::observational}) {
    const auto& side = c.side(r);
    for (std::size_t k = 0; k < side.size(); ++k) {
      for (int cell = 0; cell < 4; ++cell) {
        if (side[k][cell] == 0) continue;
        out += std::to_string(k) + ',' + to_string(r) + ',' + std::to_string(cell >> 1) + ',' +
               std::to_string(cell & 1) + ',' + std::to_string(side[k][cell]) + '\n';
      }
    }
  }
  return out;
}

/// Inverse of counters_csv; zero cells may be omitted.
inline SampleCounters parse_counters_csv(std::string_view text, int n_observed, std::string spec_hash) {
  auto c = SampleCounters::zeros(n_observed, std::move(spec_hash));
  const auto ls = io::lines(text);
  if (ls.empty() || ls[0] != "key,regime,x,y,count") throw ValidationError("counter CSV header is malformed");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    const auto f = io::split(ls[i]);
    if (f.size() != 5) throw ValidationError("counter CSV row has wrong arity");
    const auto key = io::parse_int<std::uint64_t>(f[0]);
    if (key >= c.exp.size()) throw ValidationError("counter CSV key out of range");
    SampleRegime r;
    if (f[1] == "exp") r = SampleRegime::experimental;
    else if (f[1] == "obs") r = SampleRegime::observational;
    else throw ValidationError("counter CSV regime must be exp or obs");
    const auto x = io::parse_int<int>(f[2]), y = io::parse_int<int>(f[3]);
    if ((x != 0 && x != 1) || (y != 0 && y != 1)) throw ValidationError("counter CSV x/y must be 0 or 1");
    c.side(r)[key][2 * x + y] += io::parse_int<std::uint64_t>(f[4]);
  }
  return c;
}

inline std::string dataset_csv(const Dataset& d) {
  std::string out;
  for (int i = 1; i <= d.n_observed; ++i) out += 'z' + std::to_string(i) + ',';
  out += "lb,ub,n_exp,n_obs,consistent\n";
  for (const auto& r : d.records) {
    for (int i = 0; i < d.n_observed; ++i) out += ((r.key.value >> i) & 1U) ? "1," : "0,";
    out += io::format_real(r.lb) + ',' + io::format_real(r.ub) + ',' + std::to_string(r.n_exp) + ',' +
           std::to_string(r.n_obs) + ',' + (r.consistent ? "1" : "0") + '\n';
  }
  return out;
}

inline Dataset parse_dataset_csv(std::string_view text) {
  const auto ls = io::lines(text);
  if (ls.empty()) throw ValidationError("dataset CSV is empty");
  const auto header = io::split(ls[0]);
  if (header.size() < 6 || header[header.size() - 5] != "lb") throw ValidationError("dataset CSV header is malformed");
  Dataset d;
  d.n_observed = static_cast<int>(header.size()) - 5;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    const auto f = io::split(ls[i]);
    if (f.size() != header.size()) throw ValidationError("dataset CSV row has wrong arity");
    LabeledRecord r;
    for (int b = 0; b < d.n_observed; ++b) {
      const auto bit = f[static_cast<std::size_t>(b)];
      if (bit == "1") r.key.value |= 1U << b;
      else if (bit != "0") throw ValidationError("dataset features must be 0 or 1");
    }
    const std::size_t o = static_cast<std::size_t>(d.n_observed);
    r.lb = io::parse_real(f[o]);
    r.ub = io::parse_real(f[o + 1]);
    r.n_exp = io::parse_int<std::uint64_t>(f[o + 2]);
    r.n_obs = io::parse_int<std::uint64_t>(f[o + 3]);
    r.consistent = f[o + 4] == "1";
    if (!(r.lb >= 0.0 && r.lb <= 1.0 && r.ub >= 0.0 && r.ub <= 1.0)) {
      throw ValidationError("dataset labels must lie in [0, 1]");
    }
    d.records.push_back(r);
  }
  std::sort(d.records.begin(), d.records.end(), [](auto& a, auto& b) { return a.key < b.key; });
  for (std::size_t i = 1; i < d.records.size(); ++i) {
    if (d.records[i].key == d.records[i - 1].key) throw ValidationError("duplicate subpopulation in dataset");
  }
  return d;
}

inline nlohmann::json to_json(const DatasetMeta& m) {
  return {{"scm_hash", m.scm_hash},       {"seed", m.seed},
          {"threshold", m.threshold},     {"n_exp_total", m.n_exp_total},
          {"n_obs_total", m.n_obs_total}, {"generator_version", m.generator_version},
          {"prng", m.prng}};
}

inline DatasetMeta dataset_meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  try {
    m.scm_hash = j.at("scm_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threshold = j.at("threshold").get<std::uint64_t>();
    m.n_exp_total = j.at("n_exp_total").get<std::uint64_t>();
    m.n_obs_total = j.at("n_obs_total").get<std::uint64_t>();
    m.generator_version = j.value("generator_version", std::string(kDatagenVersion));
    m.prng = j.value("prng", std::string(CounterStream::kAlgorithm));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed dataset metadata: ") + e.what());
  }
  return m;
}

}  // namespace pnsml
