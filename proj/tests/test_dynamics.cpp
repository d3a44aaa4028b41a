#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "geoest/dynamics.hpp"
#include "geoest/rng.hpp"

using namespace geoest;

namespace {

RigidBodyParams small_sat() {
  RigidBodyParams p;
  p.mass = 21.0;
  p.j = Vec3(2.56, 3.01, 2.98).asDiagonal();
  return p;
}

}  // namespace

TEST_CASE("gravity_wrench", "[dynamics]") {
  RigidBodyParams p = small_sat();
  const double mu = 1.729e10;

  // p along a principal axis of J: zero gravity-gradient moment
  {
    const Pose g(Rotation::identity(), Vec3(3.1e5, 0, 0));
    auto [torque, force] = gravity_wrench(g, p, mu);
    REQUIRE(torque.norm() < 1e-14 * force.norm());
  }
  // point-mass limit J -> eps I: force approaches the two-body value
  {
    const Pose g(exp_so3(Vec3(0.3, 0.2, -0.4)), Vec3(2e5, -1e5, 1.5e5));
    RigidBodyParams tiny = p;
    tiny.j = 1e-8 * Mat3::Identity();
    auto [torque, force] = gravity_wrench(g, tiny, mu);
    const Vec3 pb = g.r.matrix().transpose() * g.b;
    const Vec3 two_body = -mu * tiny.mass / std::pow(g.b.norm(), 3) * pb;
    REQUIRE((force - two_body).norm() < 1e-9 * two_body.norm());
    REQUIRE(torque.norm() < 1e-6);
  }
  // linearity in mu
  {
    const Pose g(exp_so3(Vec3(0.1, 0.5, 0.2)), Vec3(3e5, 1e5, -2e5));
    auto [t1, f1] = gravity_wrench(g, p, mu);
    auto [t2, f2] = gravity_wrench(g, p, 2.0 * mu);
    REQUIRE((t2 - 2.0 * t1).norm() < 1e-12 * t1.norm());
    REQUIRE((f2 - 2.0 * f1).norm() < 1e-12 * f1.norm());
  }
  // equivariance: re-expressing the body frame rotates p and M_G together
  {
    const Pose g(exp_so3(Vec3(0.2, -0.3, 0.5)), Vec3(2.5e5, 5e4, -1e5));
    const Rotation q = exp_so3(Vec3(0.7, 0.1, -0.2));
    RigidBodyParams rotated = p;
    rotated.j = q.matrix().transpose() * p.j * q.matrix();
    const Pose g2(g.r * q, g.b);
    auto [t1, f1] = gravity_wrench(g, p, mu);
    auto [t2, f2] = gravity_wrench(g2, rotated, mu);
    REQUIRE((t2 - q.matrix().transpose() * t1).norm() < 1e-9 * t1.norm());
    REQUIRE((f2 - q.matrix().transpose() * f1).norm() < 1e-9 * f1.norm());
  }
  REQUIRE_THROWS_AS(
      gravity_wrench(Pose(Rotation::identity(), Vec3(0.5, 0, 0)), p, mu),
      OriginSingularity);
}

TEST_CASE("dynamics_rhs equilibrium and energy", "[dynamics]") {
  RigidBodyParams p = small_sat();
  // xi = 0, no force: zero velocity rate
  {
    TruthState s;
    const DynamicsDerivative d = dynamics_rhs(s, p, ForceModel::none());
    REQUIRE(d.i_xi_dot.norm() == 0.0);
    REQUIRE(d.pose_rate.vector().norm() == 0.0);
  }
  // torque-free Euler dynamics conserve rotational kinetic energy
  {
    TruthState s;
    s.xi = Twist(Vec3(0.3, -0.5, 0.8), Vec3::Zero());
    const double e0 = 0.5 * s.xi.omega.dot(p.j * s.xi.omega);
    const auto traj =
        integrate_truth(s, p, ForceModel::none(), 0.01, 1000, TruthMethod::RK4);
    for (const TruthState& st : traj) {
      const double e = 0.5 * st.xi.omega.dot(p.j * st.xi.omega);
      REQUIRE(std::abs(e - e0) < 1e-8 * e0);
    }
  }
}

TEST_CASE("integrate_truth basics", "[dynamics]") {
  RigidBodyParams p = small_sat();
  // zero velocity, zero force: constant trajectory
  {
    TruthState s;
    s.g = Pose(exp_so3(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3));
    const auto traj = integrate_truth(s, p, ForceModel::none(), 0.1, 100);
    REQUIRE((traj.back().g.r.matrix() - s.g.r.matrix()).norm() < 1e-14);
    REQUIRE((traj.back().g.b - s.g.b).norm() < 1e-14);
  }
  // multiplicative updates keep the rotation on SO(3) for 1e5 steps
  {
    TruthState s;
    s.xi = Twist(Vec3(0.5, -0.4, 0.9), Vec3(0.1, 0, 0));
    TruthState cur = s;
    for (int i = 0; i < 100000; ++i) {
      cur = truth_step(cur, p, ForceModel::none(), 0.01, TruthMethod::LieEuler);
    }
    const Mat3 m = cur.g.r.matrix();
    REQUIRE((m.transpose() * m - Mat3::Identity()).norm() < 1e-9);
    REQUIRE(std::abs(m.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("RKMK4 agrees with a fine Lie-Euler cross-check", "[dynamics]") {
  // same rigid body and inputs as the finite-time observer scenario
  RigidBodyParams p = small_sat();
  ForceModel f;
  f.prescribed = [](double) {
    Vec6 w;
    w << 0.07, 0.0687, 0.02, 0.4, 0.5, 0.768;
    return w;
  };
  f.uniform_gravity_mps2 = 9.81;
  TruthState s;
  s.g = Pose(exp_so3(0.1 * Vec3(4, 2, 1)), Vec3(1, 2, 3));
  s.xi = Twist(Vec3(0.5, -0.5, 0.1), 1e-3 * Vec3(-5, 25, 30));

  const auto coarse = integrate_truth(s, p, f, 0.01, 200, TruthMethod::RK4);
  const auto fine = integrate_truth(s, p, f, 1e-5, 200000,
                                    TruthMethod::LieEuler);
  const TruthState& a = coarse.back();
  const TruthState& b = fine.back();
  REQUIRE((a.g.b - b.g.b).norm() < 1e-3 * std::max(1.0, b.g.b.norm()));
  REQUIRE((a.g.r.matrix() - b.g.r.matrix()).norm() < 1e-3);
  REQUIRE((a.xi.vector() - b.xi.vector()).norm() < 1e-3);
}

TEST_CASE("prescribed_omega profile", "[dynamics]") {
  const Vec3 w0 = prescribed_omega(0.0);
  REQUIRE(w0.x() == 0.0);
  REQUIRE(w0.y() == Catch::Approx(-std::sin(std::numbers::pi / 20)));
  REQUIRE(w0.z() == 1.0);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(prescribed_omega(0.05 * i).cwiseAbs().maxCoeff() <= 1.0);
  }
  // integrating Poisson's equation with the profile stays on SO(3)
  Rotation r = Rotation::identity();
  for (int i = 0; i < 2000; ++i) {
    r = attitude_profile_step(r, prescribed_omega, i * 0.01, 0.01);
  }
  const Mat3 m = r.matrix();
  REQUIRE((m.transpose() * m - Mat3::Identity()).norm() < 1e-9);
}

TEST_CASE("uniform gravity enters the body frame force", "[dynamics]") {
  RigidBodyParams p = small_sat();
  ForceModel f;
  f.uniform_gravity_mps2 = 9.81;
  const Rotation r = exp_so3(Vec3(0.4, -0.2, 0.9));
  TruthState s;
  s.g = Pose(r, Vec3::Zero());
  const DynamicsDerivative d = dynamics_rhs(s, p, f);
  const Vec3 expected =
      -p.mass * 9.81 * (r.matrix().transpose() * Vec3::UnitZ());
  REQUIRE((d.i_xi_dot.tail<3>() - expected).norm() < 1e-12 * expected.norm());
}
