#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pnsml {

/// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and an integer index.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// FNV-1a over a tag; used to turn stage names into seed indices.
constexpr std::uint64_t tag64(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
  return derive_seed(seed, tag64(tag));
}

/// Counter-based random stream: the draws for sample `index` depend only on
/// (key, index), so any partition of the index range yields the same draws.
///
/// Algorithm "splitmix64-ctr/1": state_0 = mix64(key ^ mix64(index)), then the
/// standard splitmix64 sequence (state += golden gamma; output mix64(state)).
class CounterStream {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr/1";

  constexpr CounterStream(std::uint64_t key, std::uint64_t index) noexcept
      : state_(mix64(key ^ mix64(index))) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Precomputed integer threshold for a Bernoulli(p) draw from a uniform 64-bit
/// word: success iff word < threshold (or always, for p >= 1).
struct BernoulliThreshold {
  std::uint64_t threshold = 0;
  bool always = false;

  static BernoulliThreshold from(double p) noexcept {
    BernoulliThreshold t;
    if (!(p > 0.0)) return t;
    if (p >= 1.0) {
      t.always = true;
      return t;
    }
    t.threshold = static_cast<std::uint64_t>(std::ldexp(p, 64));
    return t;
  }

  constexpr bool test(std::uint64_t word) const noexcept { return always || word < threshold; }
};

/// Sequential generator for training-side randomness (init, bootstrap,
/// shuffles). Wraps std::mt19937_64, whose output sequence is fixed by the
/// standard; the conversions below are ours so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = -n % n;
    for (;;) {
      const std::uint64_t r = engine_();
      const unsigned __int128 m = static_cast<unsigned __int128>(r) * n;
      if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::iter_swap(first + (i - 1), first + j);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pnsml
