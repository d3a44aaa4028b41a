// geoest - model-based SE(3) observers: the asymptotic observer with
// gravity-parameter estimation, the force-measurement observer, and the
// finite-time convergent observer.
#pragma once

#include <cmath>
#include <functional>

#include "geoest/core.hpp"
#include "geoest/dynamics.hpp"
#include "geoest/lie.hpp"

namespace geoest {

/// Full-state measurement (pose and body twist) at one instant.
struct FullStateMeasurement {
  Pose g;
  Twist xi;
  double t = 0.0;
};

/// Geodesic interpolation between two measurements (used for the RK4
/// substages between measurement epochs).
inline FullStateMeasurement interpolate(const FullStateMeasurement& m0,
                                        const FullStateMeasurement& m1,
                                        double alpha) {
  FullStateMeasurement out;
  const ExpCoords step = log_se3(m0.g.inverse() * m1.g);
  out.g = m0.g * exp_se3(ExpCoords(Vec6(alpha * step.vector())));
  out.xi = Twist(Vec6((1.0 - alpha) * m0.xi.vector() + alpha * m1.xi.vector()));
  out.t = (1.0 - alpha) * m0.t + alpha * m1.t;
  return out;
}

// ---------------------------------------------------------------------------
// Gravity-parameter observer
// ---------------------------------------------------------------------------

struct GravityObserverGains {
  Mat6 k1 = Mat6::Identity();  // block diagonal, positive definite
  double k2 = 1.0;
  double k3 = 1.0;
  Mat6 k4 = Mat6::Identity();

  static Mat6 block_diag(double rot, double trans) {
    Mat6 m = Mat6::Zero();
    m.topLeftCorner<3, 3>() = rot * Mat3::Identity();
    m.bottomRightCorner<3, 3>() = trans * Mat3::Identity();
    return m;
  }
};

struct GravityObserverState {
  Pose ghat;
  Twist breve_xi;  // breve xi = Ad_{h^-1} xihat, h = ghat^-1 g
  double muhat = 0.0;
  double t = 0.0;
};

/// Builds the internal state from initial estimates (ghat_0, xihat_0,
/// muhat_0) and the first measurement.
inline GravityObserverState gravity_observer_init(
    const Pose& ghat0, const Twist& xihat0, double muhat0,
    const FullStateMeasurement& m0) {
  GravityObserverState s;
  s.ghat = ghat0;
  const Pose h = ghat0.inverse() * m0.g;
  s.breve_xi = Twist(Vec6(adjoint_Ad(h.inverse()) * xihat0.vector()));
  s.muhat = muhat0;
  s.t = m0.t;
  return s;
}

struct GravityObserverDerivs {
  Vec6 ghat_twist;    // ghat_dot = ghat * hat(ghat_twist)
  Vec6 breve_xi_dot;
  double muhat_dot;
  ExpCoords eta;      // log(ghat^-1 g), exposed for diagnostics
  Vec6 ell;           // xi_tilde + K1 eta
};

inline GravityObserverDerivs gravity_observer_rhs(
    const GravityObserverState& state, const FullStateMeasurement& meas,
    const RigidBodyParams& params, const GravityObserverGains& gains,
    const SphericalGravity& gravity) {
  const Pose h = state.ghat.inverse() * meas.g;
  const ExpCoords eta = log_se3(h);
  const Vec6 xi = meas.xi.vector();
  const Vec6 xi_tilde = xi - state.breve_xi.vector();
  const Vec6 k1eta = gains.k1 * eta.vector();
  const Vec6 ell = xi_tilde + k1eta;
  const Mat6 g_eta = g_matrix(eta);
  const Mat6 ii = params.big_i();
  const Vec6 psi = psi_g(meas.g, params, gravity);

  const Vec6 s_xi = -ad(k1eta).transpose() * (ii * xi) +
                    gains.k2 * g_eta.transpose() * eta.vector() +
                    gains.k1 * (ii * (g_eta * xi_tilde)) + gains.k4 * ell;
  GravityObserverDerivs d;
  d.breve_xi_dot =
      ii.inverse() * (ad(state.breve_xi.vector()).transpose() * (ii * xi) +
                      state.muhat * psi + s_xi);
  d.muhat_dot = ell.dot(psi) / gains.k3;
  d.ghat_twist = adjoint_Ad(h) * state.breve_xi.vector();
  d.eta = eta;
  d.ell = ell;
  return d;
}

/// V = 1/2 k2 eta^T eta + 1/2 ell^T II ell + 1/2 k3 mu_tilde^2; mu_true
/// is test-side knowledge.
inline double gravity_observer_lyapunov(const GravityObserverState& state,
                                        const FullStateMeasurement& meas,
                                        const RigidBodyParams& params,
                                        const GravityObserverGains& gains,
                                        double mu_true) {
  const Pose h = state.ghat.inverse() * meas.g;
  const ExpCoords eta = log_se3(h);
  const Vec6 xi_tilde = meas.xi.vector() - state.breve_xi.vector();
  const Vec6 ell = xi_tilde + gains.k1 * eta.vector();
  const double mu_tilde = mu_true - state.muhat;
  return 0.5 * gains.k2 * eta.vector().squaredNorm() +
         0.5 * ell.dot(params.big_i() * ell) +
         0.5 * gains.k3 * mu_tilde * mu_tilde;
}

/// One RK4 step between measurement epochs; the pose estimate is
/// propagated multiplicatively.
inline GravityObserverState gravity_observer_step(
    const GravityObserverState& state, const FullStateMeasurement& meas_i,
    const FullStateMeasurement& meas_mid, const FullStateMeasurement& meas_i1,
    const RigidBodyParams& params, const GravityObserverGains& gains,
    const SphericalGravity& gravity) {
  const double h = meas_i1.t - meas_i.t;
  GravityObserverState out = state;
  using Vec7 = Eigen::Matrix<double, 7, 1>;
  Vec7 v;
  v << state.breve_xi.vector(), state.muhat;
  Pose ghat = state.ghat;
  detail::rkmk4_step(
      ghat, v, state.t, h,
      [&](const Pose& gs, const Vec7& vv, double tt) {
        const FullStateMeasurement& m =
            (tt <= meas_i.t) ? meas_i
                             : (tt >= meas_i1.t ? meas_i1 : meas_mid);
        GravityObserverState s;
        s.ghat = gs;
        s.breve_xi = Twist(Vec6(vv.head<6>()));
        s.muhat = vv[6];
        s.t = tt;
        const GravityObserverDerivs d =
            gravity_observer_rhs(s, m, params, gains, gravity);
        Vec7 vdot;
        vdot << d.breve_xi_dot, d.muhat_dot;
        return std::make_pair(d.ghat_twist, vdot);
      });
  out.ghat = ghat;
  out.breve_xi = Twist(Vec6(v.head<6>()));
  out.muhat = v[6];
  out.t = meas_i1.t;
  return out;
}

inline GravityObserverState gravity_observer_step(
    const GravityObserverState& state, const FullStateMeasurement& meas_i,
    const FullStateMeasurement& meas_i1, const RigidBodyParams& params,
    const GravityObserverGains& gains, const SphericalGravity& gravity) {
  return gravity_observer_step(state, meas_i,
                               interpolate(meas_i, meas_i1, 0.5), meas_i1,
                               params, gains, gravity);
}

// ---------------------------------------------------------------------------
// Force-measurement observer
// ---------------------------------------------------------------------------

struct ForceObserverGains {
  double k1 = 1.0;
  double k2 = 1.0;
  double k3 = 1.0;

  Mat6 kmat() const { return GravityObserverGains::block_diag(1.0, k2); }
};

struct ForceObserverState {
  Pose ghat;
  Twist breve_xi;
  double t = 0.0;
};

inline ForceObserverState force_observer_init(const Pose& ghat0,
                                              const Twist& xihat0,
                                              const FullStateMeasurement& m0) {
  ForceObserverState s;
  s.ghat = ghat0;
  const Pose h = ghat0.inverse() * m0.g;
  s.breve_xi = Twist(Vec6(adjoint_Ad(h.inverse()) * xihat0.vector()));
  s.t = m0.t;
  return s;
}

struct ForceObserverDerivs {
  Vec6 ghat_twist;
  Vec6 breve_xi_dot;
};

/// Measured wrench as a function of (measured pose, time).
using WrenchFn = std::function<Vec6(const Pose&, double)>;

inline ForceObserverDerivs force_observer_rhs(const ForceObserverState& state,
                                              const FullStateMeasurement& meas,
                                              const Vec6& wrench,
                                              const RigidBodyParams& params,
                                              const ForceObserverGains& gains) {
  const Pose h = state.ghat.inverse() * meas.g;
  const ExpCoords eta = log_se3(h);
  const Vec6 xi = meas.xi.vector();
  const Vec6 xi_tilde = xi - state.breve_xi.vector();
  const Mat6 kmat = gains.kmat();
  const Vec6 u = gains.k1 * eta.vector() + xi_tilde;
  const Mat6 ii = params.big_i();
  // ad* argument xi - K u; equals -K(k1 eta - breve_xi) when K = I and is
  // the form under which d/dt V = -k1 eta^T K eta - k3 u^T K u for all k2.
  const Vec6 ad_arg = xi - kmat * u;
  const ExpCoords keta(Vec6(kmat * eta.vector()));
  ForceObserverDerivs d;
  d.breve_xi_dot =
      ii.inverse() * (ad(ad_arg).transpose() * (ii * xi) + wrench +
                      gains.k1 * (ii * (g_matrix(eta) * xi_tilde)) +
                      g_matrix(keta).transpose() * eta.vector() +
                      gains.k3 * u);
  d.ghat_twist = adjoint_Ad(h) * state.breve_xi.vector();
  return d;
}

inline double force_observer_lyapunov(const ForceObserverState& state,
                                      const FullStateMeasurement& meas,
                                      const RigidBodyParams& params,
                                      const ForceObserverGains& gains) {
  const Pose h = state.ghat.inverse() * meas.g;
  const ExpCoords eta = log_se3(h);
  const Vec6 xi_tilde = meas.xi.vector() - state.breve_xi.vector();
  const Vec6 u = gains.k1 * eta.vector() + xi_tilde;
  const Mat6 kmat = gains.kmat();
  return 0.5 * eta.vector().dot(kmat * eta.vector()) +
         0.5 * u.dot(kmat * (params.big_i() * u));
}

inline ForceObserverState force_observer_step(
    const ForceObserverState& state, const FullStateMeasurement& meas_i,
    const FullStateMeasurement& meas_mid, const FullStateMeasurement& meas_i1,
    const WrenchFn& wrench, const RigidBodyParams& params,
    const ForceObserverGains& gains) {
  const double h = meas_i1.t - meas_i.t;
  ForceObserverState out = state;
  Vec6 v = state.breve_xi.vector();
  Pose ghat = state.ghat;
  detail::rkmk4_step(ghat, v, state.t, h,
                     [&](const Pose& gs, const Vec6& vv, double tt) {
                       const FullStateMeasurement& m =
                           (tt <= meas_i.t)
                               ? meas_i
                               : (tt >= meas_i1.t ? meas_i1 : meas_mid);
                       ForceObserverState s{gs, Twist(vv), tt};
                       const ForceObserverDerivs d = force_observer_rhs(
                           s, m, wrench(m.g, tt), params, gains);
                       return std::make_pair(d.ghat_twist, d.breve_xi_dot);
                     });
  out.ghat = ghat;
  out.breve_xi = Twist(v);
  out.t = meas_i1.t;
  return out;
}

inline ForceObserverState force_observer_step(const ForceObserverState& state,
                                              const FullStateMeasurement& meas_i,
                                              const FullStateMeasurement& meas_i1,
                                              const WrenchFn& wrench,
                                              const RigidBodyParams& params,
                                              const ForceObserverGains& gains) {
  return force_observer_step(state, meas_i,
                             interpolate(meas_i, meas_i1, 0.5), meas_i1,
                             wrench, params, gains);
}

// ---------------------------------------------------------------------------
// Finite-time observer
// ---------------------------------------------------------------------------

struct FiniteTimeGains {
  double k = 1.0;
  int p_num = 23;  // p = p_num / p_den, odd integers, 1 < p < 2
  int p_den = 21;
  double gamma = 1.0;  // the explicit decay-rate bound requires gamma >= 1
  double guard = 1e-9;  // eps_ft on the quadratic forms

  double p() const { return static_cast<double>(p_num) / p_den; }

  void validate() const {
    if (k <= 0.0 || gamma <= 0.0) {
      throw Error("FiniteTimeGains: k and gamma must be positive");
    }
    if (p_num % 2 == 0 || p_den % 2 == 0) {
      throw Error("FiniteTimeGains: p must be a ratio of odd integers");
    }
    if (p() <= 1.0 || p() >= 2.0) {
      throw Error("FiniteTimeGains: p must lie in (1, 2)");
    }
  }
};

/// Internal state: the pose error in exponential coordinates and breve
/// xi. The pose estimate is recovered as ghat = g exp(-eta_tilde).
struct FiniteTimeState {
  Vec6 eta_tilde = Vec6::Zero();
  Twist breve_xi;
  double t = 0.0;

  Pose ghat(const Pose& g_meas) const {
    return g_meas * exp_se3(ExpCoords(Vec6(-eta_tilde)));
  }
};

inline FiniteTimeState finite_time_init(const Pose& ghat0, const Twist& xihat0,
                                        const FullStateMeasurement& m0) {
  FiniteTimeState s;
  const Pose h = ghat0.inverse() * m0.g;
  s.eta_tilde = log_se3(h).vector();
  s.breve_xi = Twist(Vec6(adjoint_Ad(h.inverse()) * xihat0.vector()));
  s.t = m0.t;
  return s;
}

struct FiniteTimeDerivs {
  Vec6 eta_dot;
  Vec6 breve_xi_dot;
};

inline FiniteTimeDerivs finite_time_rhs(const FiniteTimeState& state,
                                        const Vec6& xi_meas, const Vec6& wrench,
                                        const RigidBodyParams& params,
                                        const FiniteTimeGains& gains) {
  const double p = gains.p();
  const Vec6& eta = state.eta_tilde;
  const double s = eta.squaredNorm();
  const Vec6 xi_tilde = xi_meas - state.breve_xi.vector();
  const ExpCoords eta_coords(eta);
  const Mat6 g_eta = g_matrix(eta_coords);
  const Mat6 ii = params.big_i();

  Vec6 u = xi_tilde;
  Vec6 h_term = Vec6::Zero();
  Vec6 corr = Vec6::Zero();
  if (s >= gains.guard) {
    const double spow = std::pow(s, 1.0 - 1.0 / p);
    u += gains.k * eta / spow;
    const Mat6 h_mat =
        (Mat6::Identity() - 2.0 * (1.0 - 1.0 / p) / s * (eta * eta.transpose())) /
        spow;
    h_term = gains.k * (ii * (h_mat * (g_eta * xi_tilde)));
    corr = gains.k * std::pow(s, 1.0 / p - 1.0) * eta;
  }
  const double w = u.dot(ii * u);
  Vec6 u_term = Vec6::Zero();
  if (w >= gains.guard) {
    u_term = gains.k * (ii * u) / std::pow(w, 1.0 - 1.0 / p);
  }
  FiniteTimeDerivs d;
  d.breve_xi_dot =
      ii.inverse() * (ad(Vec6(state.breve_xi.vector() - corr)).transpose() *
                          (ii * xi_meas) +
                      wrench + h_term +
                      gains.gamma * g_eta.transpose() * eta + u_term);
  d.eta_dot = g_eta * xi_tilde;
  return d;
}

/// V = 1/2 gamma eta^T eta + 1/2 u^T II u.
inline double finite_time_lyapunov(const FiniteTimeState& state,
                                   const Vec6& xi_meas,
                                   const RigidBodyParams& params,
                                   const FiniteTimeGains& gains) {
  const double s = state.eta_tilde.squaredNorm();
  Vec6 u = xi_meas - state.breve_xi.vector();
  if (s >= gains.guard) {
    u += gains.k * state.eta_tilde / std::pow(s, 1.0 - 1.0 / gains.p());
  }
  return 0.5 * gains.gamma * s + 0.5 * u.dot(params.big_i() * u);
}

/// One RK4 step on (eta_tilde, breve_xi). When both guard forms drop
/// below eps_ft the error state is frozen at the origin (eta = 0,
/// breve_xi = xi), realizing the finite-time fixed point.
inline FiniteTimeState finite_time_observer_step(
    const FiniteTimeState& state, const FullStateMeasurement& meas_i,
    const FullStateMeasurement& meas_mid, const FullStateMeasurement& meas_i1,
    const WrenchFn& wrench, const RigidBodyParams& params,
    const FiniteTimeGains& gains) {
  const double h = meas_i1.t - meas_i.t;
  // already frozen at the origin: coast with the measurement (the
  // integration substages would otherwise re-excite the fractional-power
  // terms through measurement interpolation error)
  {
    const Vec6 xi_tilde_0 = meas_i.xi.vector() - state.breve_xi.vector();
    if (state.eta_tilde.squaredNorm() < gains.guard &&
        xi_tilde_0.dot(params.big_i() * xi_tilde_0) < gains.guard) {
      FiniteTimeState frozen;
      frozen.eta_tilde.setZero();
      frozen.breve_xi = meas_i1.xi;
      frozen.t = meas_i1.t;
      return frozen;
    }
  }
  using Vec12 = Eigen::Matrix<double, 12, 1>;
  auto rhs = [&](const Vec12& y, double tt) -> Vec12 {
    const FullStateMeasurement& m =
        (tt <= meas_i.t) ? meas_i : (tt >= meas_i1.t ? meas_i1 : meas_mid);
    FiniteTimeState s;
    s.eta_tilde = y.head<6>();
    s.breve_xi = Twist(Vec6(y.tail<6>()));
    s.t = tt;
    const FiniteTimeDerivs d =
        finite_time_rhs(s, m.xi.vector(), wrench(m.g, tt), params, gains);
    Vec12 dy;
    dy << d.eta_dot, d.breve_xi_dot;
    return dy;
  };
  Vec12 y;
  y << state.eta_tilde, state.breve_xi.vector();
  const Vec12 k1 = rhs(y, state.t);
  const Vec12 k2 = rhs(y + 0.5 * h * k1, state.t + 0.5 * h);
  const Vec12 k3 = rhs(y + 0.5 * h * k2, state.t + 0.5 * h);
  const Vec12 k4 = rhs(y + h * k3, state.t + h);
  y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  FiniteTimeState out;
  out.eta_tilde = y.head<6>();
  out.breve_xi = Twist(Vec6(y.tail<6>()));
  out.t = meas_i1.t;
  const Vec6 xi_tilde = meas_i1.xi.vector() - out.breve_xi.vector();
  if (out.eta_tilde.squaredNorm() < gains.guard &&
      xi_tilde.dot(params.big_i() * xi_tilde) < gains.guard) {
    out.eta_tilde.setZero();
    out.breve_xi = meas_i1.xi;
  }
  return out;
}

inline FiniteTimeState finite_time_observer_step(
    const FiniteTimeState& state, const FullStateMeasurement& meas_i,
    const FullStateMeasurement& meas_i1, const WrenchFn& wrench,
    const RigidBodyParams& params, const FiniteTimeGains& gains) {
  return finite_time_observer_step(state, meas_i,
                                   interpolate(meas_i, meas_i1, 0.5), meas_i1,
                                   wrench, params, gains);
}

/// Co-propagates the plant and the observer with one RK4 scheme, the
/// observer reading the plant's stage values (optionally corrupted).
/// Sampled measurements leave an O(h^2) stage mismatch that the
/// fractional-power terms amplify into an error floor; co-propagation
/// removes it and realizes the exact finite-time fixed point.
inline std::pair<TruthState, FiniteTimeState> finite_time_coupled_step(
    const TruthState& truth, const FiniteTimeState& state,
    const RigidBodyParams& plant_params, const ForceModel& plant_force,
    const WrenchFn& known_wrench, const RigidBodyParams& params,
    const FiniteTimeGains& gains, double h,
    const std::function<FullStateMeasurement(const TruthState&)>* corrupt =
        nullptr) {
  const Mat6 ii_plant = plant_params.big_i();
  const Mat6 ii_plant_inv = ii_plant.inverse();
  auto measure = [&](const TruthState& s) -> FullStateMeasurement {
    if (corrupt != nullptr) return (*corrupt)(s);
    return FullStateMeasurement{s.g, s.xi, s.t};
  };
  // frozen at the origin: observe the plant stage values directly
  {
    const FullStateMeasurement m0 = measure(truth);
    const Vec6 xi_tilde_0 = m0.xi.vector() - state.breve_xi.vector();
    if (state.eta_tilde.squaredNorm() < gains.guard &&
        xi_tilde_0.dot(params.big_i() * xi_tilde_0) < gains.guard) {
      const TruthState t1 =
          truth_step(truth, plant_params, plant_force, h, TruthMethod::RK4);
      FiniteTimeState frozen;
      frozen.eta_tilde.setZero();
      frozen.breve_xi = measure(t1).xi;
      frozen.t = t1.t;
      return {t1, frozen};
    }
  }
  using Vec24 = Eigen::Matrix<double, 24, 1>;
  auto rhs = [&](const Vec24& y, double tt) -> Vec24 {
    const Vec6 sigma = y.segment<6>(0);
    TruthState ts;
    ts.g = truth.g * exp_se3(ExpCoords(sigma));
    ts.xi = Twist(Vec6(y.segment<6>(6)));
    ts.t = tt;
    FiniteTimeState os;
    os.eta_tilde = y.segment<6>(12);
    os.breve_xi = Twist(Vec6(y.segment<6>(18)));
    os.t = tt;
    const FullStateMeasurement m = measure(ts);
    // the applied wrench is known as a signal, so it is evaluated on the
    // plant pose; only the velocity feedback sees measurement corruption
    const FiniteTimeDerivs d = finite_time_rhs(
        os, m.xi.vector(), known_wrench(ts.g, tt), params, gains);
    Vec24 dy;
    dy.segment<6>(0) = g_matrix(ExpCoords(sigma)) * ts.xi.vector();
    dy.segment<6>(6) =
        ii_plant_inv * (ad(ts.xi).transpose() * (ii_plant * ts.xi.vector()) +
                        external_wrench(ts.g, plant_params, plant_force, tt));
    dy.segment<6>(12) = d.eta_dot;
    dy.segment<6>(18) = d.breve_xi_dot;
    return dy;
  };
  Vec24 y;
  y << Vec6::Zero(), truth.xi.vector(), state.eta_tilde,
      state.breve_xi.vector();
  const Vec24 k1 = rhs(y, truth.t);
  const Vec24 k2 = rhs(y + 0.5 * h * k1, truth.t + 0.5 * h);
  const Vec24 k3 = rhs(y + 0.5 * h * k2, truth.t + 0.5 * h);
  const Vec24 k4 = rhs(y + h * k3, truth.t + h);
  y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  TruthState t1;
  t1.g = truth.g * exp_se3(ExpCoords(Vec6(y.segment<6>(0))));
  t1.xi = Twist(Vec6(y.segment<6>(6)));
  t1.t = truth.t + h;
  FiniteTimeState out;
  out.eta_tilde = y.segment<6>(12);
  out.breve_xi = Twist(Vec6(y.segment<6>(18)));
  out.t = t1.t;
  const Vec6 xi_tilde = measure(t1).xi.vector() - out.breve_xi.vector();
  if (out.eta_tilde.squaredNorm() < gains.guard &&
      xi_tilde.dot(params.big_i() * xi_tilde) < gains.guard) {
    out.eta_tilde.setZero();
    out.breve_xi = measure(t1).xi;
  }
  return {t1, out};
}

}  // namespace geoest
