#pragma once

#include <cstdint>
#include <random>

namespace optopulse {

/// Derives an independent stream seed from a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Seeded generator with platform-independent uniform and normal draws.
///
/// Uniform variates are built from the top 53 bits of mt19937_64 output and
/// normals by quantile inversion, so a given seed yields the same sequence
/// with any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via inversion of uniform().
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

/// Standard normal quantile function.
double normal_quantile(double u);

}  // namespace optopulse
