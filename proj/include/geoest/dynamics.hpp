// geoest - ground-truth generation: rigid-body dynamics on SE(3),
// central gravity with gradient moment around a spherical primary,
// prescribed rate profiles, and multiplicative integrators.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "geoest/core.hpp"
#include "geoest/lie.hpp"

namespace geoest {

struct RigidBodyParams {
  double mass = 1.0;        // kg
  Mat3 j = Mat3::Identity();  // kg m^2, SPD

  Mat6 big_i() const {
    Mat6 m = Mat6::Zero();
    m.topLeftCorner<3, 3>() = j;
    m.bottomRightCorner<3, 3>() = mass * Mat3::Identity();
    return m;
  }

  // 1/2 trace(J) I + J, the inertia combination in the gravity force.
  Mat3 jscript() const {
    return 0.5 * j.trace() * Mat3::Identity() + j;
  }
};

struct TruthState {
  Pose g;
  Twist xi;
  double t = 0.0;
};

struct SphericalGravity {
  double mu = 0.0;          // m^3/s^2 (or normalized)
  double min_radius = 1.0;  // below this |b| the field is singular
  // The J-dependent force corrections scale as J/|b|^2 relative to the
  // point-mass term; scenarios run in normalized length units must drop
  // them (J stays in kg m^2 there).
  bool inertia_force_terms = true;
};

struct ForceModel {
  std::optional<SphericalGravity> gravity;
  // torque (N m) and force (N), body frame, as a function of time
  std::function<Vec6(double)> prescribed;
  double uniform_gravity_mps2 = 0.0;  // inertial -z acceleration

  static ForceModel none() { return {}; }
  static ForceModel spherical(double mu, double min_radius = 1.0,
                              bool inertia_force_terms = true) {
    ForceModel f;
    f.gravity = SphericalGravity{mu, min_radius, inertia_force_terms};
    return f;
  }
};

/// Gravity-gradient moment and gravitational force in the body frame,
/// with p = R^T b:
///   M_G = mu 3/|b|^5 (p x J p)
///   F_G = mu { -m/|b|^3 p - 3/|b|^5 Jscript p + 15/2 (p^T J p)/|b|^7 p }
inline std::pair<Vec3, Vec3> gravity_wrench(const Pose& g,
                                            const RigidBodyParams& params,
                                            double mu,
                                            const SphericalGravity& model) {
  const double r = g.b.norm();
  if (r < model.min_radius) {
    throw OriginSingularity("gravity_wrench: |b| below the field guard");
  }
  const Vec3 p = g.r.matrix().transpose() * g.b;
  const double r2 = r * r;
  const double r3 = r2 * r;
  const double r5 = r3 * r2;
  const Vec3 torque = mu * 3.0 / r5 * p.cross(params.j * p);
  Vec3 force = -mu * params.mass / r3 * p;
  if (model.inertia_force_terms) {
    force += mu * (-3.0 / r5 * (params.jscript() * p) +
                   7.5 * p.dot(params.j * p) / (r5 * r2) * p);
  }
  return {torque, force};
}

inline std::pair<Vec3, Vec3> gravity_wrench(const Pose& g,
                                            const RigidBodyParams& params,
                                            double mu) {
  return gravity_wrench(g, params, mu, SphericalGravity{mu});
}

/// psi_G(g) with phi_G = mu psi_G.
inline Vec6 psi_g(const Pose& g, const RigidBodyParams& params,
                  const SphericalGravity& model) {
  auto [torque, force] = gravity_wrench(g, params, 1.0, model);
  Vec6 out;
  out << torque, force;
  return out;
}

/// Total external wrench (torque, force) in the body frame.
inline Vec6 external_wrench(const Pose& g, const RigidBodyParams& params,
                            const ForceModel& force, double t) {
  Vec6 phi = Vec6::Zero();
  if (force.gravity) {
    auto [tq, f] = gravity_wrench(g, params, force.gravity->mu, *force.gravity);
    phi.head<3>() += tq;
    phi.tail<3>() += f;
  }
  if (force.prescribed) phi += force.prescribed(t);
  if (force.uniform_gravity_mps2 != 0.0) {
    phi.tail<3>() -= params.mass * force.uniform_gravity_mps2 *
                     (g.r.matrix().transpose() * Vec3::UnitZ());
  }
  return phi;
}

struct DynamicsDerivative {
  Twist pose_rate;  // body twist: gdot = g xi^vee
  Vec6 i_xi_dot;    // II xidot = ad*_xi II xi + phi
};

inline DynamicsDerivative dynamics_rhs(const TruthState& state,
                                       const RigidBodyParams& params,
                                       const ForceModel& force) {
  const Vec6 xi = state.xi.vector();
  DynamicsDerivative d;
  d.pose_rate = state.xi;
  d.i_xi_dot = ad(state.xi).transpose() * (params.big_i() * xi) +
               external_wrench(state.g, params, force, state.t);
  return d;
}

enum class TruthMethod { RK4, LieEuler };

namespace detail {

// One Munthe-Kaas RK4 step for a state (pose on SE(3), vector part v):
// the pose increment sigma lives in exponential coordinates with
// sigma_dot = G(sigma) xi.
template <typename VecN, typename Rhs>
inline void rkmk4_step(Pose& g, VecN& v, double t, double h, const Rhs& rhs) {
  struct Stage {
    Vec6 sigma;
    VecN v;
  };
  auto eval = [&](const Vec6& sigma, const VecN& vv, double tt) {
    const Pose gs = g * exp_se3(ExpCoords(sigma));
    auto [xi, vdot] = rhs(gs, vv, tt);
    Vec6 sdot = g_matrix(ExpCoords(sigma)) * xi;
    return Stage{sdot, vdot};
  };
  const Stage k1 = eval(Vec6::Zero(), v, t);
  const Stage k2 =
      eval(0.5 * h * k1.sigma, VecN(v + 0.5 * h * k1.v), t + 0.5 * h);
  const Stage k3 =
      eval(0.5 * h * k2.sigma, VecN(v + 0.5 * h * k2.v), t + 0.5 * h);
  const Stage k4 = eval(h * k3.sigma, VecN(v + h * k3.v), t + h);
  const Vec6 sigma =
      h / 6.0 * (k1.sigma + 2.0 * k2.sigma + 2.0 * k3.sigma + k4.sigma);
  g = g * exp_se3(ExpCoords(sigma));
  v = v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
}

}  // namespace detail

inline TruthState truth_step(const TruthState& state,
                             const RigidBodyParams& params,
                             const ForceModel& force, double h,
                             TruthMethod method) {
  TruthState out = state;
  const Mat6 ii = params.big_i();
  const Mat6 ii_inv = ii.inverse();
  if (method == TruthMethod::LieEuler) {
    const DynamicsDerivative d = dynamics_rhs(state, params, force);
    out.g = state.g * exp_se3(ExpCoords(h * state.xi.vector()));
    out.xi = Twist(Vec6(state.xi.vector() + h * (ii_inv * d.i_xi_dot)));
  } else {
    Pose g = state.g;
    Vec6 v = state.xi.vector();
    detail::rkmk4_step(g, v, state.t, h,
                       [&](const Pose& gs, const Vec6& xi, double tt) {
                         TruthState s{gs, Twist(xi), tt};
                         const DynamicsDerivative d =
                             dynamics_rhs(s, params, force);
                         return std::make_pair(xi, Vec6(ii_inv * d.i_xi_dot));
                       });
    out.g = g;
    out.xi = Twist(v);
  }
  out.t = state.t + h;
  return out;
}

/// Propagates `steps` steps and returns the trajectory including the
/// initial state (steps + 1 entries).
inline std::vector<TruthState> integrate_truth(const TruthState& s0,
                                               const RigidBodyParams& params,
                                               const ForceModel& force,
                                               double h, int steps,
                                               TruthMethod method =
                                                   TruthMethod::RK4) {
  if (h <= 0.0) throw Error("integrate_truth: h must be positive");
  std::vector<TruthState> out;
  out.reserve(steps + 1);
  out.push_back(s0);
  for (int i = 0; i < steps; ++i) {
    out.push_back(truth_step(out.back(), params, force, h, method));
  }
  return out;
}

/// The comparison scenario's angular velocity profile,
/// [sin(2 pi t / 15), -sin(2 pi t / 18 + pi/20), cos(2 pi t / 17)] rad/s.
inline Vec3 prescribed_omega(double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return Vec3(std::sin(two_pi / 15.0 * t),
              -std::sin(two_pi / 18.0 * t + std::numbers::pi / 20.0),
              std::cos(two_pi / 17.0 * t));
}

/// Attitude-only propagation of Poisson's equation R_dot = R Omega^x for
/// a prescribed rate profile (Munthe-Kaas RK4 on SO(3)).
inline Rotation attitude_profile_step(const Rotation& r,
                                      const std::function<Vec3(double)>& omega,
                                      double t, double h) {
  auto eval = [&](const Vec3& sigma, double tt) -> Vec3 {
    return a_matrix(sigma) * omega(tt);
  };
  const Vec3 k1 = eval(Vec3::Zero(), t);
  const Vec3 k2 = eval(0.5 * h * k1, t + 0.5 * h);
  const Vec3 k3 = eval(0.5 * h * k2, t + 0.5 * h);
  const Vec3 k4 = eval(h * k3, t + h);
  return r * exp_so3(h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

}  // namespace geoest
