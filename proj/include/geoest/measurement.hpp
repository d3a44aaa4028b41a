// geoest - sensor models: direction vectors and rate gyros with bounded
// bump-distributed or sinusoid-sum noise, and the symmetric first-order
// Butterworth pre-filter.
#pragma once

#include <vector>

#include "geoest/core.hpp"
#include "geoest/lie.hpp"
#include "geoest/rng.hpp"
#include "geoest/wahba.hpp"

namespace geoest {

// Stream ids: direction sensor j uses stream j, the gyro a reserved one.
inline constexpr std::uint64_t kGyroStream = 0xffff0000ULL;
inline constexpr std::uint64_t kScenarioStream = 0xffff0001ULL;
// Sinusoid phases are drawn once per (sensor, component, frequency);
// this pseudo-step keys that draw.
inline constexpr std::uint64_t kPhaseStep = 0xfffffffffffffffeULL;

enum class NoiseKind { None, BumpBounded, SinusoidSum };

struct DirectionNoiseModel {
  NoiseKind kind = NoiseKind::None;
  double half_width_rad = 0.0;       // BumpBounded
  std::vector<double> freqs_hz;      // SinusoidSum
  std::vector<double> amps;
  Mat3 dj = Mat3::Identity();        // mixing matrix D_j

  static DirectionNoiseModel none() { return {}; }
  static DirectionNoiseModel bump(double half_width_rad) {
    DirectionNoiseModel m;
    m.kind = NoiseKind::BumpBounded;
    m.half_width_rad = half_width_rad;
    return m;
  }
  static DirectionNoiseModel sinusoids(std::vector<double> freqs_hz,
                                       std::vector<double> amps) {
    DirectionNoiseModel m;
    m.kind = NoiseKind::SinusoidSum;
    m.freqs_hz = std::move(freqs_hz);
    m.amps = std::move(amps);
    return m;
  }
};

struct GyroNoiseModel {
  NoiseKind kind = NoiseKind::None;
  double half_width_rad_s = 0.0;
  std::vector<double> freqs_hz;
  std::vector<double> amps;
  Mat3 b = Mat3::Identity();
  Vec3 bias = Vec3::Zero();  // rad/s, constant across the stream

  static GyroNoiseModel none() { return {}; }
  static GyroNoiseModel bump(double half_width_rad_s) {
    GyroNoiseModel m;
    m.kind = NoiseKind::BumpBounded;
    m.half_width_rad_s = half_width_rad_s;
    return m;
  }
  static GyroNoiseModel sinusoids(std::vector<double> freqs_hz,
                                  std::vector<double> amps) {
    GyroNoiseModel m;
    m.kind = NoiseKind::SinusoidSum;
    m.freqs_hz = std::move(freqs_hz);
    m.amps = std::move(amps);
    return m;
  }
};

/// One measurement epoch: timestamp, measured body directions of the
/// active sensors, and the gyro reading.
struct MeasurementFrame {
  double t = 0.0;
  BodyMeasurementSet um;
  Vec3 omega_m = Vec3::Zero();
  std::vector<int> active_sensor_ids;
};

namespace detail {

inline Vec3 noise_vector(NoiseKind kind, double half_width,
                         const std::vector<double>& freqs,
                         const std::vector<double>& amps, double t,
                         std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t step) {
  Vec3 nu = Vec3::Zero();
  switch (kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::BumpBounded: {
      CounterRng rng(seed, stream, step);
      for (int c = 0; c < 3; ++c) nu[c] = bump_sample(half_width, rng);
      break;
    }
    case NoiseKind::SinusoidSum: {
      for (std::size_t f = 0; f < freqs.size(); ++f) {
        CounterRng prng(seed, stream * 8 + f, kPhaseStep);
        for (int c = 0; c < 3; ++c) {
          const double phase = prng.uniform(0.0, 2.0 * std::numbers::pi);
          const double amp = f < amps.size() ? amps[f] : 0.0;
          nu[c] += amp * std::sin(2.0 * std::numbers::pi * freqs[f] * t + phase);
        }
      }
      break;
    }
  }
  return nu;
}

}  // namespace detail

/// Measures raw direction columns (no augmentation):
/// u_j = R^T e_j + D_j nu_j(t). `step` indexes the frame; per-sensor
/// substreams come from (seed, sensor_id, step).
inline Mat3X measure_direction_columns(const Rotation& r, const Mat3X& cols,
                                       const DirectionNoiseModel& noise,
                                       double t, std::uint64_t seed,
                                       std::uint64_t step,
                                       const std::vector<int>* sensor_ids =
                                           nullptr) {
  Mat3X u(3, cols.cols());
  const Mat3 rt = r.matrix().transpose();
  for (int j = 0; j < cols.cols(); ++j) {
    const std::uint64_t sid =
        sensor_ids ? static_cast<std::uint64_t>((*sensor_ids)[j])
                   : static_cast<std::uint64_t>(j);
    const Vec3 nu = detail::noise_vector(noise.kind, noise.half_width_rad,
                                         noise.freqs_hz, noise.amps, t, seed,
                                         sid, step);
    u.col(j) = rt * cols.col(j) + noise.dj * nu;
  }
  return u;
}

/// Measures every column of an (already augmented) direction set. Pairs
/// of raw sensors should instead go through measure_direction_columns +
/// BodyMeasurementSet::from_columns so the third column is the cross
/// product of the measured vectors.
inline BodyMeasurementSet measure_directions(const Rotation& r,
                                             const DirectionSet& e,
                                             const DirectionNoiseModel& noise,
                                             double t, std::uint64_t seed,
                                             std::uint64_t step,
                                             const std::vector<int>* sensor_ids =
                                                 nullptr) {
  BodyMeasurementSet out;
  out.u = measure_direction_columns(r, e.e, noise, t, seed, step, sensor_ids);
  return out;
}

/// Omega^m = Omega + B w(t) + beta.
inline Vec3 measure_gyro(const Vec3& omega, const GyroNoiseModel& noise,
                         double t, std::uint64_t seed, std::uint64_t step) {
  const Vec3 w = detail::noise_vector(noise.kind, noise.half_width_rad_s,
                                      noise.freqs_hz, noise.amps, t, seed,
                                      kGyroStream, step);
  return omega + noise.b * w + noise.bias;
}

/// Symmetric first-order Butterworth pre-filter:
/// (2 + h) xbar_{k+1} = (2 - h) xbar_k + h (x^m_k + x^m_{k+1}).
struct ButterworthState {
  Vec3 xbar = Vec3::Zero();
  double h = 0.0;

  ButterworthState() = default;
  ButterworthState(const Vec3& x0, double h_) : xbar(x0), h(h_) {
    if (h <= 0.0) throw Error("ButterworthState: h must be positive");
  }

  Vec3 step(const Vec3& xm_k, const Vec3& xm_k1) {
    xbar = ((2.0 - h) * xbar + h * (xm_k + xm_k1)) / (2.0 + h);
    return xbar;
  }
};

}  // namespace geoest
