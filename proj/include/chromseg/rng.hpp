#pragma once

#include <cstdint>
#include <random>

namespace chromseg {

// One SplitMix64 step from state x: add the golden-ratio increment, then mix.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Derives an independent stream seed from (seed, index):
//   mix(s, i) = splitmix64(s ^ splitmix64(i + 0x9E3779B97F4A7C15)).
// Used for per-sample, per-attempt and per-epoch seeds so that results do not
// depend on evaluation order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// mt19937_64 engine with portable distributions. The standard library's
// distribution classes are implementation-defined, so they are avoided to keep
// generated files identical across toolchains.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi].
  std::int64_t range(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller.
  double normal();

private:
  std::mt19937_64 engine_;
};

}  // namespace chromseg
