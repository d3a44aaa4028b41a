#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "geoest/measurement.hpp"
#include "geoest/rng.hpp"

using namespace geoest;

TEST_CASE("bump_sample", "[measurement]") {
  CounterRng rng(1, 0, 0);
  REQUIRE(bump_sample(0.0, rng) == 0.0);

  const double hw = 0.7;
  double sum = 0.0;
  double max_abs = 0.0;
  const int n = 1000000;
  CounterRng draw(2, 0, 0);
  for (int i = 0; i < n; ++i) {
    const double x = bump_sample(hw, draw);
    REQUIRE(std::abs(x) < hw);
    sum += x;
    max_abs = std::max(max_abs, std::abs(x));
  }
  // zero-mean by symmetry of the density
  REQUIRE(std::abs(sum / n) < 1e-3 * hw);
  // the support is genuinely explored
  REQUIRE(max_abs > 0.9 * hw);
}

TEST_CASE("measure_directions", "[measurement]") {
  const DirectionSet e = DirectionSet::from_columns(Mat3X(Mat3::Identity()));
  const Rotation r = exp_so3(Vec3(0.3, -0.7, 0.2));

  // no noise: U^m = R^T E exactly
  const BodyMeasurementSet clean =
      measure_directions(r, e, DirectionNoiseModel::none(), 0.0, 5, 0);
  REQUIRE((clean.u - r.matrix().transpose() * e.e).norm() == 0.0);

  // bump noise: every component of D_j nu_j bounded by the half width
  const double hw = 2.4 * std::numbers::pi / 180.0;
  const DirectionNoiseModel bump = DirectionNoiseModel::bump(hw);
  double mean = 0.0;
  long count = 0;
  for (int step = 0; step < 20000; ++step) {
    const BodyMeasurementSet um =
        measure_directions(r, e, bump, step * 0.01, 5, step);
    const Mat3X noise = um.u - r.matrix().transpose() * e.e;
    REQUIRE(noise.cwiseAbs().maxCoeff() < hw);
    mean += noise.sum();
    count += noise.size();
  }
  // zero-mean draws
  REQUIRE(std::abs(mean / count) < 3.0 * (hw * 0.4) / std::sqrt(double(count)) +
                                       1e-3 * hw);
}

TEST_CASE("measurement streams are reproducible and order-independent",
          "[measurement]") {
  const DirectionSet e = DirectionSet::from_columns(Mat3X(Mat3::Identity()));
  const Rotation r = exp_so3(Vec3(0.1, 0.2, 0.3));
  const DirectionNoiseModel bump = DirectionNoiseModel::bump(0.5);
  // evaluate steps out of order; values depend only on (seed, sensor, step)
  const BodyMeasurementSet a5 = measure_directions(r, e, bump, 0.05, 9, 5);
  const BodyMeasurementSet a3 = measure_directions(r, e, bump, 0.03, 9, 3);
  const BodyMeasurementSet b3 = measure_directions(r, e, bump, 0.03, 9, 3);
  const BodyMeasurementSet b5 = measure_directions(r, e, bump, 0.05, 9, 5);
  REQUIRE((a5.u - b5.u).norm() == 0.0);
  REQUIRE((a3.u - b3.u).norm() == 0.0);
  // different seeds give different streams
  const BodyMeasurementSet c3 = measure_directions(r, e, bump, 0.03, 10, 3);
  REQUIRE((c3.u - b3.u).norm() > 0.0);
}

TEST_CASE("measure_gyro", "[measurement]") {
  const Vec3 omega(0.2, -0.1, 0.4);
  REQUIRE((measure_gyro(omega, GyroNoiseModel::none(), 0.0, 1, 0) - omega)
              .norm() == 0.0);

  GyroNoiseModel biased = GyroNoiseModel::none();
  biased.bias = Vec3(-0.01, -0.005, 0.02);
  REQUIRE((measure_gyro(omega, biased, 0.0, 1, 0) - omega - biased.bias)
              .norm() < 1e-15);

  const double hw = 0.97 * std::numbers::pi / 180.0;
  GyroNoiseModel noisy = GyroNoiseModel::bump(hw);
  noisy.bias = biased.bias;
  for (int step = 0; step < 20000; ++step) {
    const Vec3 w =
        measure_gyro(omega, noisy, step * 0.01, 1, step) - omega - noisy.bias;
    REQUIRE(w.cwiseAbs().maxCoeff() < hw);
  }
}

TEST_CASE("sinusoid-sum noise", "[measurement]") {
  const DirectionSet e = DirectionSet::from_columns(Mat3X(Mat3::Identity()));
  const Rotation r = Rotation::identity();
  const double bound = 2.4 * std::numbers::pi / 180.0;
  const std::vector<double> amps = {bound / 3, bound / 3, bound / 3};
  const DirectionNoiseModel sin_noise =
      DirectionNoiseModel::sinusoids({1.0, 10.0, 100.0}, amps);

  // amplitude bounded by the sum of the component amplitudes, and the
  // signal is 1-periodic for commensurate frequencies
  for (int i = 0; i < 1000; ++i) {
    const double t = 0.001 * i;
    const Mat3X n0 =
        measure_directions(r, e, sin_noise, t, 3, i).u - e.e;
    const Mat3X n1 =
        measure_directions(r, e, sin_noise, t + 1.0, 3, i).u - e.e;
    REQUIRE(n0.cwiseAbs().maxCoeff() <= bound + 1e-12);
    REQUIRE((n0 - n1).norm() < 1e-9);
  }
}

TEST_CASE("butterworth pre-filter", "[measurement]") {
  const double h = 0.01;

  // constant input from matching initial state is a fixed point
  {
    ButterworthState bw(Vec3(2, -1, 3), h);
    for (int i = 0; i < 100; ++i) {
      REQUIRE((bw.step(Vec3(2, -1, 3), Vec3(2, -1, 3)) - Vec3(2, -1, 3))
                  .norm() < 1e-14);
    }
  }
  // geometric decay toward a constant: |xbar - c| < 1e-6 after
  // ceil(ln(1e6) / ln((2+h)/(2-h))) steps
  {
    ButterworthState bw(Vec3::Zero(), h);
    const Vec3 c(1, 1, 1);
    const int steps = static_cast<int>(
        std::ceil(std::log(1e6) / std::log((2.0 + h) / (2.0 - h))));
    Vec3 x = Vec3::Zero();
    for (int i = 0; i < steps; ++i) x = bw.step(c, c);
    REQUIRE((x - c).cwiseAbs().maxCoeff() < 1e-6);
    // one step earlier the bound is not yet met (the count is sharp)
    ButterworthState bw2(Vec3::Zero(), h);
    Vec3 y = Vec3::Zero();
    for (int i = 0; i < steps - 1; ++i) y = bw2.step(c, c);
    REQUIRE((y - c).cwiseAbs().maxCoeff() > 1e-6 * 0.9);
  }
  // high-frequency attenuation, measured on an alias-free grid
  {
    const double hf = 1e-3;
    auto response = [&](double freq) {
      ButterworthState bw(Vec3::Zero(), hf);
      double peak = 0.0;
      auto sig = [&](double t) {
        return Vec3::Ones() * std::sin(2 * std::numbers::pi * freq * t);
      };
      for (int i = 0; i < 20000; ++i) {
        const Vec3 x = bw.step(sig(i * hf), sig((i + 1) * hf));
        if (i > 10000) peak = std::max(peak, std::abs(x[0]));
      }
      return peak;
    };
    REQUIRE(response(200.0) < 0.5 * response(1.0));
  }
  REQUIRE_THROWS_AS(ButterworthState(Vec3::Zero(), 0.0), Error);
}
