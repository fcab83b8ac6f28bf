#pragma once

#include <cstdint>

namespace stzitd {

// Deterministic generator used everywhere randomness is needed. Samplers are
// hand-rolled (not std::<distribution>) so that streams are reproducible
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via the Marsaglia polar method.
  double normal();

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Poisson count by summing unit exponentials until they exceed lambda.
  // Exact and underflow-free; cost is O(lambda) draws.
  long poisson(double lambda);

  // Gamma(shape, scale) via Marsaglia & Tsang (2000), with the usual
  // shape < 1 boost.
  double gamma(double shape, double scale);

  // splitmix64-style combiner for deriving per-cell seeds from a base seed.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::uint64_t s_[4];
};

}  // namespace stzitd
