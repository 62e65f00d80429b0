#pragma once

#include <cstdint>

namespace stochastok {

// SplitMix64 finalizer. All seed derivation goes through this function so
// results are reproducible across platforms, standard libraries and languages.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for document `index` of pass `epoch` under `global_seed`:
/// mix64(mix64(mix64(global_seed) ^ epoch) ^ index).
constexpr std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t epoch,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(mix64(global_seed) ^ epoch) ^ index);
}

/// Small deterministic generator (SplitMix64 stream). std::uniform_*_distribution
/// is implementation-defined, so bounded and real draws are done here explicitly.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // UniformRandomBitGenerator surface, for std::shuffle and friends in tests.
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return ~std::uint64_t{0}; }
  constexpr std::uint64_t operator()() noexcept { return next(); }

  /// Uniform integer in [0, bound). bound must be > 0. Unbiased (rejection).
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

  /// Uniform integer in [lo, hi].
  constexpr std::uint64_t between(std::uint64_t lo, std::uint64_t hi) noexcept {
    return lo + below(hi - lo + 1);
  }

  /// Uniform double in [0, 1) with 53 bits of precision.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace stochastok
