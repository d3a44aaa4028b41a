// geoest - the variational attitude estimator: continuous right-hand
// side, implicit first-order LGVI, its explicit adjoint, the symmetric
// second-order composition, and the bias-augmented variant.
#pragma once

#include <optional>

#include "geoest/core.hpp"
#include "geoest/lie.hpp"
#include "geoest/measurement.hpp"
#include "geoest/wahba.hpp"

namespace geoest {

struct VarEstGains {
  double m_scalar = 1.0;            // positive "inertia" gain
  Mat3 d = Mat3::Identity();        // SPD dissipation
  PhiFunction phi = PhiFunction::identity();
  std::optional<Mat3> p_bias;       // SPD, bias variant only
};

struct VarEstState {
  Rotation rhat;
  Vec3 omega = Vec3::Zero();    // angular velocity residual
  Vec3 betahat = Vec3::Zero();  // bias estimate (zero when disabled)
  double t = 0.0;
};

struct NewtonConfig {
  double tol = 1e-12;  // residual infinity norm, rad/s
  int max_iter = 50;
};

/// The Wahba-potential context for one direction set: E, W, and the
/// cached product E W feeding L = E W (U^m)^T every step.
class AttitudePotential {
 public:
  AttitudePotential(DirectionSet e, WeightMatrix w)
      : e_(std::move(e)), w_(std::move(w)) {
    if (w_.w.rows() != e_.count()) {
      throw DimensionMismatch("AttitudePotential: W does not match E");
    }
    ew_ = e_.e * w_.w;
    if (ew_.cols() == 3) ew3_ = Mat3(ew_);
  }

  const DirectionSet& directions() const { return e_; }
  const WeightMatrix& weights() const { return w_; }

  Mat3 l(const BodyMeasurementSet& um) const {
    if (um.count() != e_.count()) {
      throw DimensionMismatch("AttitudePotential: U^m does not match E");
    }
    if (ew3_) {
      return *ew3_ * Mat3(um.u).transpose();
    }
    return ew_ * um.u.transpose();
  }

  double cost0(const Rotation& rhat, const BodyMeasurementSet& um) const {
    return wahba_cost0(rhat, um, e_, w_);
  }

  /// Phi'(U^0(Rhat, U^m)) * S_L(Rhat); skips the cost evaluation when
  /// Phi is the identity.
  Vec3 weighted_s_l(const Rotation& rhat, const BodyMeasurementSet& um,
                    const PhiFunction& phi) const {
    const Vec3 sl = s_l(rhat, l(um));
    if (phi.is_identity) return sl;
    return phi.dphi(cost0(rhat, um)) * sl;
  }

 private:
  DirectionSet e_;
  WeightMatrix w_;
  Mat3X ew_;
  std::optional<Mat3> ew3_;  // fixed-size product path for k = 3
};

struct VarEstDerivs {
  Vec3 omega_hat;    // Rhat_dot = Rhat * hat(omega_hat)
  Vec3 omega_dot;
  Vec3 betahat_dot;
};

/// Continuous-time filter equations. A null potential (fewer than two
/// visible directions) drops the attitude-potential term.
inline VarEstDerivs continuous_rhs(const VarEstState& state,
                                   const MeasurementFrame& frame,
                                   const AttitudePotential* pot,
                                   const VarEstGains& gains) {
  const Vec3 omega_hat = frame.omega_m - state.omega - state.betahat;
  Vec3 sl = Vec3::Zero();
  if (pot != nullptr) {
    sl = pot->weighted_s_l(state.rhat, frame.um, gains.phi);
  }
  VarEstDerivs d;
  d.omega_hat = omega_hat;
  d.omega_dot = (-gains.m_scalar * omega_hat.cross(state.omega) + sl -
                 gains.d * state.omega) /
                gains.m_scalar;
  d.betahat_dot = gains.p_bias
                      ? Vec3(gains.p_bias->partialPivLu().solve(sl))
                      : Vec3::Zero();
  return d;
}

/// Solves residual(omega) = 0 with Newton iterations. `jacobian` may be
/// empty; a forward-difference Jacobian at step 1e-7 is used then.
template <typename ResidualFn, typename JacobianFn>
inline Vec3 newton_solve_omega(const ResidualFn& residual,
                               const JacobianFn& jacobian, const Vec3& guess,
                               const NewtonConfig& cfg) {
  Vec3 omega = guess;
  Vec3 f = residual(omega);
  double res_norm = f.template lpNorm<Eigen::Infinity>();
  if (res_norm < cfg.tol) return omega;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Mat3 jac = jacobian(omega);
    const Vec3 step = jac.partialPivLu().solve(f);
    if (!step.allFinite()) {
      throw NewtonNonConvergence(it, res_norm);
    }
    omega -= step;
    f = residual(omega);
    res_norm = f.template lpNorm<Eigen::Infinity>();
    if (res_norm < cfg.tol) return omega;
  }
  throw NewtonNonConvergence(cfg.max_iter, res_norm);
}

template <typename ResidualFn>
inline Vec3 newton_solve_omega(const ResidualFn& residual, const Vec3& guess,
                               const NewtonConfig& cfg) {
  auto fd_jacobian = [&](const Vec3& omega) {
    constexpr double eps = 1e-7;
    Mat3 jac;
    const Vec3 f0 = residual(omega);
    for (int c = 0; c < 3; ++c) {
      Vec3 pert = omega;
      pert[c] += eps;
      jac.col(c) = (residual(pert) - f0) / eps;
    }
    return jac;
  };
  return newton_solve_omega(residual, fd_jacobian, guess, cfg);
}

namespace detail {

// Solves m w = exp(-h (omega_ref - w)^x) c for w. omega_ref stands for
// Omega^m_{i+1} (minus betahat_{i+1} in the bias variant).
inline Vec3 solve_implicit_omega(double m, double h, const Vec3& omega_ref,
                                 const Vec3& c, const Vec3& guess,
                                 const NewtonConfig& cfg) {
  auto residual = [&](const Vec3& w) -> Vec3 {
    return m * w - detail::exp_so3_matrix(-h * (omega_ref - w)) * c;
  };
  auto jacobian = [&](const Vec3& w) -> Mat3 {
    const Vec3 x = -h * (omega_ref - w);
    // d/dx [exp(x^) c] = -exp(x^) hat(c) J_r(x); dx/dw = h I
    return m * Mat3::Identity() +
           h * detail::exp_so3_matrix(x) * hat(c) * so3_right_jacobian(x);
  };
  return newton_solve_omega(residual, jacobian, guess, cfg);
}

}  // namespace detail

namespace detail {

inline double frame_dt(const MeasurementFrame& a, const MeasurementFrame& b) {
  return b.t - a.t;
}

inline bool is_diagonal(const Mat3& m) {
  return m(0, 1) == 0.0 && m(0, 2) == 0.0 && m(1, 0) == 0.0 &&
         m(1, 2) == 0.0 && m(2, 0) == 0.0 && m(2, 1) == 0.0;
}

// solves (m I + h D) x = rhs, with the diagonal-D case componentwise
inline Vec3 solve_m_plus_hd(double m, double h, const Mat3& d,
                            const Vec3& rhs) {
  if (is_diagonal(d)) {
    return Vec3(rhs[0] / (m + h * d(0, 0)), rhs[1] / (m + h * d(1, 1)),
                rhs[2] / (m + h * d(2, 2)));
  }
  return (m * Mat3::Identity() + h * d).partialPivLu().solve(rhs);
}

}  // namespace detail

/// Implicit first-order LGVI step:
///   Rhat_{i+1} = Rhat_i exp(h (Omega^m_i - omega_i)^x)
///   m omega_{i+1} = exp(-h Omegahat_{i+1}^x) { (m I - h D) omega_i
///                   + h Phi' S_L(Rhat_{i+1}) }.
/// On Newton failure the step is retried once as two half steps.
inline VarEstState step_implicit(const VarEstState& state,
                                 const MeasurementFrame& frame_i,
                                 const MeasurementFrame& frame_i1,
                                 const AttitudePotential* pot_i1,
                                 const VarEstGains& gains,
                                 const NewtonConfig& newton,
                                 bool allow_substep = true) {
  const double h = detail::frame_dt(frame_i, frame_i1);
  const double m = gains.m_scalar;
  VarEstState out;
  out.rhat = state.rhat * exp_so3(h * (frame_i.omega_m - state.omega));
  out.t = frame_i1.t;
  const Vec3 sl = pot_i1 ? pot_i1->weighted_s_l(out.rhat, frame_i1.um, gains.phi)
                         : Vec3::Zero();
  const Vec3 c = (m * Mat3::Identity() - h * gains.d) * state.omega + h * sl;
  try {
    out.omega = detail::solve_implicit_omega(m, h, frame_i1.omega_m, c,
                                             state.omega, newton);
  } catch (const NewtonNonConvergence&) {
    if (!allow_substep) throw;
    // retry once as two half steps across an interpolated midpoint frame
    MeasurementFrame mid;
    mid.t = frame_i.t + 0.5 * h;
    mid.omega_m = 0.5 * (frame_i.omega_m + frame_i1.omega_m);
    mid.um.u = (frame_i.um.u.cols() == frame_i1.um.u.cols())
                   ? Mat3X(0.5 * (frame_i.um.u + frame_i1.um.u))
                   : frame_i1.um.u;
    mid.active_sensor_ids = frame_i1.active_sensor_ids;
    const VarEstState half =
        step_implicit(state, frame_i, mid, pot_i1, gains, newton, false);
    return step_implicit(half, mid, frame_i1, pot_i1, gains, newton, false);
  }
  return out;
}

/// Cache for step_explicit: the previous step's attitude increment
/// exp(h (Omega^m_i - omega_i)^x), whose transpose is exactly the
/// exp(-h Omegahat_i^x) factor of the next omega update, plus the
/// loop-invariant gain inverse (m I + h D)^{-1}.
struct ExplicitStepCache {
  Mat3 increment = Mat3::Identity();
  Mat3 gain_inverse = Mat3::Identity();
  double h = 0.0;
  bool valid = false;
};

/// Explicit first-order step, the adjoint of step_implicit:
///   omega_{i+1} = (m I + h D)^{-1} { exp(-h Omegahat_i^x) m omega_i
///                 + h Phi' S_L(Rhat_i) }
///   Rhat_{i+1} = Rhat_i exp(h (Omega^m_{i+1} - omega_{i+1})^x).
inline VarEstState step_explicit(const VarEstState& state,
                                 const MeasurementFrame& frame_i,
                                 const MeasurementFrame& frame_i1,
                                 const AttitudePotential* pot_i,
                                 const VarEstGains& gains,
                                 ExplicitStepCache* cache = nullptr) {
  const double h = detail::frame_dt(frame_i, frame_i1);
  const double m = gains.m_scalar;
  const Vec3 sl = pot_i ? pot_i->weighted_s_l(state.rhat, frame_i.um, gains.phi)
                        : Vec3::Zero();
  VarEstState out;
  if (cache != nullptr) {
    if (!cache->valid || cache->h != h) {
      cache->gain_inverse =
          Mat3(m * Mat3::Identity() + h * gains.d).inverse();
      if (!cache->valid) {
        cache->increment =
            detail::exp_so3_matrix(h * (frame_i.omega_m - state.omega));
      }
      cache->h = h;
      cache->valid = true;
    }
    const Vec3 rotated = cache->increment.transpose() * (m * state.omega);
    out.omega = cache->gain_inverse * (rotated + h * sl);
    const Mat3 increment =
        detail::exp_so3_matrix(h * (frame_i1.omega_m - out.omega));
    out.rhat = state.rhat * Rotation::from_matrix_unchecked(increment);
    out.t = frame_i1.t;
    cache->increment = increment;
    return out;
  }
  const Vec3 omega_hat_i = frame_i.omega_m - state.omega;
  const Vec3 rotated =
      detail::exp_so3_matrix(-h * omega_hat_i) * (m * state.omega);
  out.omega = detail::solve_m_plus_hd(m, h, gains.d, Vec3(rotated + h * sl));
  out.rhat =
      state.rhat * exp_so3(h * (frame_i1.omega_m - out.omega));
  out.t = frame_i1.t;
  return out;
}

/// Symmetric second-order step: half-step explicit composed with
/// half-step implicit (Strang composition), with Omega^m at mid-step
/// taken as the average of the endpoint measurements.
inline VarEstState step_symmetric(const VarEstState& state,
                                  const MeasurementFrame& frame_i,
                                  const MeasurementFrame& frame_i1,
                                  const AttitudePotential* pot_i,
                                  const AttitudePotential* pot_i1,
                                  const VarEstGains& gains,
                                  const NewtonConfig& newton) {
  const double h = detail::frame_dt(frame_i, frame_i1);
  const double m = gains.m_scalar;
  const Vec3 omega_m_mid = 0.5 * (frame_i.omega_m + frame_i1.omega_m);
  const Vec3 omega_hat_i = frame_i.omega_m - state.omega;
  const Vec3 sl_i = pot_i
                        ? pot_i->weighted_s_l(state.rhat, frame_i.um, gains.phi)
                        : Vec3::Zero();
  const Vec3 omega_half =
      (m * Mat3::Identity() + 0.5 * h * gains.d)
          .partialPivLu()
          .solve(detail::exp_so3_matrix(-0.5 * h * omega_hat_i) *
                     (m * state.omega) +
                 0.5 * h * sl_i);
  VarEstState out;
  out.rhat = state.rhat * exp_so3(h * (omega_m_mid - omega_half));
  out.t = frame_i1.t;
  const Vec3 sl_i1 =
      pot_i1 ? pot_i1->weighted_s_l(out.rhat, frame_i1.um, gains.phi)
             : Vec3::Zero();
  const Vec3 c =
      (m * Mat3::Identity() - 0.5 * h * gains.d) * omega_half + 0.5 * h * sl_i1;
  out.omega = detail::solve_implicit_omega(m, 0.5 * h, frame_i1.omega_m, c,
                                           omega_half, newton);
  return out;
}

/// Bias-augmented implicit step: the bias estimate integrates
/// betahat_{i+1} = betahat_i + h Phi' P^{-1} S_L(Rhat_i), and all
/// propagation exponents use Omega^m - omega - betahat.
inline VarEstState step_bias_implicit(const VarEstState& state,
                                      const MeasurementFrame& frame_i,
                                      const MeasurementFrame& frame_i1,
                                      const AttitudePotential* pot_i,
                                      const AttitudePotential* pot_i1,
                                      const VarEstGains& gains,
                                      const NewtonConfig& newton) {
  if (!gains.p_bias) {
    throw Error("step_bias_implicit: gains.p_bias is required");
  }
  const double h = detail::frame_dt(frame_i, frame_i1);
  const double m = gains.m_scalar;
  VarEstState out;
  out.rhat = state.rhat *
             exp_so3(h * (frame_i.omega_m - state.omega - state.betahat));
  out.t = frame_i1.t;
  const Vec3 sl_i = pot_i
                        ? pot_i->weighted_s_l(state.rhat, frame_i.um, gains.phi)
                        : Vec3::Zero();
  out.betahat = state.betahat + h * gains.p_bias->partialPivLu().solve(sl_i);
  const Vec3 sl_i1 =
      pot_i1 ? pot_i1->weighted_s_l(out.rhat, frame_i1.um, gains.phi)
             : Vec3::Zero();
  const Vec3 c = (m * Mat3::Identity() - h * gains.d) * state.omega + h * sl_i1;
  out.omega = detail::solve_implicit_omega(
      m, h, Vec3(frame_i1.omega_m - out.betahat), c, state.omega, newton);
  return out;
}

}  // namespace geoest
