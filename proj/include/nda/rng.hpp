#pragma once

#include <cstdint>
#include <vector>

namespace nda {

/// PCG32 (XSH-RR output, 64-bit LCG state) as published in pcg_basic.
///
/// Construction follows pcg32_srandom_r(seed, stream). The default stream 54
/// is the one used by the reference demo, so Rng(42) reproduces its output.
///
/// Substreams: derive(id) returns Rng(seed ^ splitmix64(id), id), so every
/// experiment stage gets an independent generator from the same run seed.
class Rng {
public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kDefaultStream = 54;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = kDefaultStream);

  /// Next raw 32-bit output; advances the state by one step.
  std::uint32_t next_u32();

  /// next_u32() / 2^32, in [0, 1). One state step per value.
  double uniform();

  /// Uniform integer in [0, bound) by threshold rejection (pcg32_boundedrand_r).
  std::uint32_t below(std::uint32_t bound);

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  /// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the U^(1/shape) boost.
  double gamma(double shape);

  /// Beta(a, b) as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
  double beta(double a, double b);

  /// Child generator for an experiment stage.
  Rng derive(std::uint64_t stream_id) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t state() const noexcept { return state_; }
  std::uint64_t increment() const noexcept { return inc_; }

  friend bool operator==(const Rng &, const Rng &) = default;

private:
  std::uint64_t seed_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
};

/// n uniforms in [0, 1); n == 0 leaves the generator untouched.
std::vector<double> rng_uniform(Rng &rng, std::size_t n);

std::uint64_t splitmix64(std::uint64_t x);

/// Uniform random permutation of 0..n-1 (Fisher-Yates, high to low).
std::vector<int> random_permutation(Rng &rng, int n);

} // namespace nda
