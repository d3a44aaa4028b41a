// geoest - discrete-time comparison filters: the geometric approximate
// minimum-energy (GAME) filter, the multiplicative EKF, and the constant
// gain observer, discretized by Lie-Euler attitude updates and explicit
// Euler + symmetrization on the gain ODEs.
#pragma once

#include <vector>

#include "geoest/core.hpp"
#include "geoest/lie.hpp"
#include "geoest/measurement.hpp"
#include "geoest/wahba.hpp"

namespace geoest {

struct CovFilterState {
  Rotation rhat;
  Mat3 p = Mat3::Identity();
  double t = 0.0;
};

struct CgoState {
  Rotation rhat;
  double t = 0.0;
};

/// Per-sensor innovation weights script-D_j = (D_j D_j^T)^{-1}.
struct InnovationWeights {
  std::vector<Mat3> dscr;

  static InnovationWeights uniform(int count, const Mat3& dj) {
    InnovationWeights w;
    w.dscr.assign(count, (dj * dj.transpose()).inverse());
    return w;
  }
};

struct GameConfig {
  Mat3 q_cov = Mat3::Zero();  // Q = B B^T
  double p_norm_limit = 1e6;
};

struct MekfConfig {
  Mat3 q_cov = Mat3::Zero();
  double p_norm_limit = 1e6;
};

struct CgoConfig {
  Mat3 k_p = Mat3::Identity();
};

/// ell = sum_j (script-D_j (uhat_j - u_j)) x uhat_j with uhat_j = Rhat^T e_j.
inline Vec3 innovation(const Rotation& rhat, const BodyMeasurementSet& um,
                       const DirectionSet& e, const InnovationWeights& w) {
  if (um.count() != e.count() ||
      static_cast<int>(w.dscr.size()) != e.count()) {
    throw DimensionMismatch("innovation: inconsistent sensor counts");
  }
  const Mat3 rt = rhat.matrix().transpose();
  Vec3 ell = Vec3::Zero();
  for (int j = 0; j < e.count(); ++j) {
    const Vec3 uhat = rt * e.e.col(j);
    ell += Vec3(w.dscr[j] * (uhat - Vec3(um.u.col(j)))).cross(uhat);
  }
  return ell;
}

/// Unweighted innovation of the constant gain observer,
/// ellbar = sum_j uhat_j x u_j (the sign that corrects the estimate).
inline Vec3 innovation_unweighted(const Rotation& rhat,
                                  const BodyMeasurementSet& um,
                                  const DirectionSet& e) {
  if (um.count() != e.count()) {
    throw DimensionMismatch("innovation_unweighted: counts differ");
  }
  const Mat3 rt = rhat.matrix().transpose();
  Vec3 ell = Vec3::Zero();
  for (int j = 0; j < e.count(); ++j) {
    const Vec3 uhat = rt * e.e.col(j);
    ell += uhat.cross(Vec3(um.u.col(j)));
  }
  return ell;
}

/// sum_j uhat_j^x script-D_j uhat_j^x (negative semidefinite), the
/// measurement-information term of the Riccati equations.
inline Mat3 information_term(const Rotation& rhat, const DirectionSet& e,
                             const InnovationWeights& w) {
  const Mat3 rt = rhat.matrix().transpose();
  Mat3 s = Mat3::Zero();
  for (int j = 0; j < e.count(); ++j) {
    const Mat3 uh = hat(rt * e.e.col(j));
    s += uh * w.dscr[j] * uh;
  }
  return s;
}

namespace detail {

inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

inline void check_covariance(const Mat3& p, double limit) {
  if (!p.allFinite()) {
    throw CovarianceBlowup("covariance has non-finite entries");
  }
  if (p.norm() > limit) {
    throw CovarianceBlowup("covariance norm exceeds limit");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(p);
  if (es.eigenvalues().minCoeff() < 0.0) {
    throw CovarianceBlowup("covariance lost positive definiteness");
  }
}

}  // namespace detail

/// One GAME step at stepsize h: attitude by exp(h (Omega^m - P ell)^x),
/// P by explicit Euler on the gain ODE, then symmetrized. Throws
/// CovarianceBlowup when P leaves the PD cone; the caller flags the run.
inline CovFilterState game_step(const CovFilterState& state,
                                const MeasurementFrame& frame,
                                const DirectionSet& e,
                                const InnovationWeights& w,
                                const GameConfig& cfg, double h) {
  const Vec3 ell = innovation(state.rhat, frame.um, e, w);
  CovFilterState out;
  out.rhat = state.rhat * exp_so3(h * (frame.omega_m - state.p * ell));
  out.t = state.t + h;
  const Mat3 rt = state.rhat.matrix().transpose();
  Mat3 res_term = Mat3::Zero();
  Mat3 info = Mat3::Zero();
  for (int j = 0; j < e.count(); ++j) {
    const Vec3 uhat = rt * e.e.col(j);
    res_term += detail::symmetrize(
        (w.dscr[j] * (uhat - Vec3(frame.um.u.col(j)))) * uhat.transpose());
    const Mat3 uh = hat(uhat);
    info += uh * w.dscr[j] * uh;
  }
  const Mat3 pdot =
      cfg.q_cov +
      detail::symmetrize(state.p * hat(2.0 * frame.omega_m - state.p * ell)) +
      state.p *
          (res_term.trace() * Mat3::Identity() - res_term + info) *
          state.p;
  out.p = detail::symmetrize(state.p + h * pdot);
  detail::check_covariance(out.p, cfg.p_norm_limit);
  return out;
}

/// One MEKF step; same transport as GAME, Riccati
/// P_dot = Q + P_s(P (2 Omega^m)^x) + P [sum uhat^x script-D uhat^x] P.
inline CovFilterState mekf_step(const CovFilterState& state,
                                const MeasurementFrame& frame,
                                const DirectionSet& e,
                                const InnovationWeights& w,
                                const MekfConfig& cfg, double h) {
  const Vec3 ell = innovation(state.rhat, frame.um, e, w);
  CovFilterState out;
  out.rhat = state.rhat * exp_so3(h * (frame.omega_m - state.p * ell));
  out.t = state.t + h;
  const Mat3 pdot =
      cfg.q_cov + detail::symmetrize(state.p * hat(2.0 * frame.omega_m)) +
      state.p * information_term(state.rhat, e, w) * state.p;
  out.p = detail::symmetrize(state.p + h * pdot);
  detail::check_covariance(out.p, cfg.p_norm_limit);
  return out;
}

/// Constant gain observer: Rhat_{i+1} = Rhat_i exp(h (Omega^m - K_P ellbar)^x)
/// with ellbar = sum uhat x u.
inline CgoState cgo_step(const CgoState& state, const MeasurementFrame& frame,
                         const DirectionSet& e, const CgoConfig& cfg,
                         double h) {
  const Vec3 ellbar = innovation_unweighted(state.rhat, frame.um, e);
  CgoState out;
  out.rhat = state.rhat * exp_so3(h * (frame.omega_m - cfg.k_p * ellbar));
  out.t = state.t + h;
  return out;
}

}  // namespace geoest
