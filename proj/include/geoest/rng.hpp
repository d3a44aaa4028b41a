// geoest - counter-based random streams: every (seed, stream, step)
// triple opens an independent substream, so generated noise does not
// depend on evaluation order.
#pragma once

#include <cmath>
#include <cstdint>

#include "geoest/core.hpp"

namespace geoest {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic substream keyed by (seed, stream, step).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
    state_ = seed;
    (void)detail::splitmix64(state_);
    state_ ^= 0x6a09e667f3bcc908ULL * (stream + 1);
    (void)detail::splitmix64(state_);
    state_ ^= 0xbb67ae8584caa73bULL * (step + 1);
    (void)detail::splitmix64(state_);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unit vector uniform on the sphere.
  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }

 private:
  std::uint64_t state_;
};

/// Draw from the bump density ~ exp(-1 / (1 - (x/half_width)^2)) on
/// (-half_width, half_width), by rejection against the unit-maximum
/// normalized bump.
inline double bump_sample(double half_width, CounterRng& rng) {
  if (half_width <= 0.0) return 0.0;
  // acceptance rate ~ 0.444
  for (;;) {
    const double x = rng.uniform(-1.0, 1.0);
    const double u = rng.uniform01();
    const double denom = 1.0 - x * x;
    if (denom <= 0.0) continue;
    if (u < std::exp(1.0 - 1.0 / denom)) return half_width * x;
  }
}

}  // namespace geoest
