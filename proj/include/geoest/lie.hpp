// geoest - SO(3)/SE(3) linear algebra: hat/vex, exponential and logarithm
// maps, adjoints, and the exponential-coordinate kinematics Jacobian G(eta).
#pragma once

#include <cmath>
#include <numbers>

#include "geoest/core.hpp"

namespace geoest {

// Guard below pi for all logarithms. Exponential coordinates exclude
// rotations of exactly pi; conditioning degrades as theta -> pi.
inline constexpr double kLogGuard = 1e-6;
// Below this angle the trigonometric coefficient functions switch to
// their Taylor expansions (to O(theta^4)).
inline constexpr double kTaylorSwitch = 1e-4;
// Rotations are re-orthonormalized by polar projection after this many
// composed steps.
inline constexpr int kRenormalizeEvery = 1000;

/// Skew-symmetric matrix such that hat(v) * w = v x w.
inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

/// Inverse of hat. Throws NonSkewInput when the asymmetric part of m is
/// larger than 1e-9 * ||m||.
inline Vec3 vex(const Mat3& m) {
  if ((m + m.transpose()).norm() > 1e-9 * m.norm()) {
    throw NonSkewInput("vex: input is not skew-symmetric");
  }
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

namespace detail {

// sin(t)/t
inline double sinc(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

// (1 - cos(t)) / t^2
inline double cos_coeff(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / (t * t);
}

// (t - sin(t)) / t^3
inline double sin_cubic_coeff(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}

// 1/t^2 - (1 + cos(t)) / (2 t sin(t)); the (Theta^x)^2 coefficient of A.
inline double a_coeff(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  return 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
}

// -(1 + cos(t))(t - sin(t)) / (2 t sin(t)^2)
inline double t_coeff2(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return -1.0 / 6.0 - t2 / 180.0 - t2 * t2 / 5040.0;
  }
  const double s = std::sin(t);
  return -(1.0 + std::cos(t)) * (t - s) / (2.0 * t * s * s);
}

// (1 + cos(t))(t + sin(t)) / (2 t^3 sin(t)^2) - 2/t^4
inline double t_coeff3(double t) {
  if (std::abs(t) < kTaylorSwitch) {
    const double t2 = t * t;
    return 1.0 / 360.0 + t2 / 7560.0 + t2 * t2 / 201600.0;
  }
  const double s = std::sin(t);
  return (1.0 + std::cos(t)) * (t + s) / (2.0 * t * t * t * s * s) -
         2.0 / (t * t * t * t);
}

inline Mat3 polar_projection(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

inline Mat3 exp_so3_matrix(const Vec3& theta) {
  const double t = theta.norm();
  const Mat3 k = hat(theta);
  return Mat3::Identity() + sinc(t) * k + cos_coeff(t) * (k * k);
}

}  // namespace detail

/// Element of SO(3). Composition keeps a drift counter and re-projects
/// onto the group after kRenormalizeEvery composed steps.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Validates orthonormality (R^T R = I and det R = 1 to 1e-9).
  static Rotation from_matrix(const Mat3& m) {
    if ((m.transpose() * m - Mat3::Identity()).norm() > 1e-9 ||
        std::abs(m.determinant() - 1.0) > 1e-9) {
      throw Error("Rotation::from_matrix: matrix is not in SO(3)");
    }
    return Rotation(m, 0);
  }

  static Rotation from_matrix_unchecked(const Mat3& m) {
    return Rotation(m, 0);
  }

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const { return m_; }

  Rotation operator*(const Rotation& other) const {
    Rotation out(m_ * other.m_, std::max(steps_, other.steps_) + 1);
    if (out.steps_ >= kRenormalizeEvery) {
      out.m_ = detail::polar_projection(out.m_);
      out.steps_ = 0;
    }
    return out;
  }

  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  Rotation transposed() const { return Rotation(m_.transpose(), steps_); }

  Rotation renormalized() const {
    return Rotation(detail::polar_projection(m_), 0);
  }

  /// Rotation angle in [0, pi].
  double principal_angle() const {
    const double c = std::clamp((m_.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
  }

 private:
  Rotation(const Mat3& m, int steps) : m_(m), steps_(steps) {}
  Mat3 m_;
  int steps_ = 0;
};

/// Element of SE(3): rotation plus translation (meters).
struct Pose {
  Rotation r;
  Vec3 b = Vec3::Zero();

  Pose() = default;
  Pose(const Rotation& r_, const Vec3& b_) : r(r_), b(b_) {}

  Pose operator*(const Pose& other) const {
    return Pose(r * other.r, b + r * other.b);
  }

  Pose inverse() const {
    Rotation rt = r.transposed();
    return Pose(rt, -(rt * b));
  }
};

/// Body velocity (Omega, v) of a pose trajectory.
struct Twist {
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& omega_, const Vec3& v_) : omega(omega_), v(v_) {}
  explicit Twist(const Vec6& x) : omega(x.head<3>()), v(x.tail<3>()) {}

  Vec6 vector() const {
    Vec6 x;
    x << omega, v;
    return x;
  }
};

/// Exponential coordinates eta = (Theta, beta) of a pose. Rejects
/// principal angles of pi or larger (excluded set of the logarithm).
struct ExpCoords {
  Vec3 theta = Vec3::Zero();
  Vec3 beta = Vec3::Zero();

  ExpCoords() = default;
  ExpCoords(const Vec3& theta_, const Vec3& beta_) : theta(theta_), beta(beta_) {
    if (theta.norm() >= std::numbers::pi - kLogGuard) {
      throw NearPiSingularity("ExpCoords: principal angle too close to pi");
    }
  }
  explicit ExpCoords(const Vec6& x) : ExpCoords(Vec3(x.head<3>()), Vec3(x.tail<3>())) {}

  double principal_angle() const { return theta.norm(); }

  Vec6 vector() const {
    Vec6 x;
    x << theta, beta;
    return x;
  }
};

/// Rodrigues' formula.
inline Rotation exp_so3(const Vec3& theta) {
  return Rotation::from_matrix_unchecked(detail::exp_so3_matrix(theta));
}

/// Logarithm on SO(3). Uses (theta/sin theta)(R - R^T)/2 away from pi and
/// symmetric-part axis extraction for theta in [3.0, pi - guard). Throws
/// NearPiSingularity when the principal angle reaches pi - guard.
inline Vec3 log_so3(const Rotation& r) {
  const Mat3& m = r.matrix();
  const double theta = r.principal_angle();
  if (theta >= std::numbers::pi - kLogGuard) {
    throw NearPiSingularity("log_so3: principal angle too close to pi");
  }
  const Vec3 w =
      0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  if (theta < 3.0) {
    if (theta < kTaylorSwitch) {
      // theta/(2 sin theta) * 2w, expanded
      const double t2 = theta * theta;
      return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
    }
    return (theta / std::sin(theta)) * w;
  }
  // Near pi: axis from the symmetric part, B = (R + R^T)/2 - cos(theta) I
  // = (1 - cos(theta)) a a^T.
  const double c = std::cos(theta);
  const Mat3 b = 0.5 * (m + m.transpose()) - c * Mat3::Identity();
  const double scale = 1.0 - c;
  Vec3 a;
  int k = 0;
  b.diagonal().maxCoeff(&k);
  a[k] = std::sqrt(std::max(0.0, b(k, k) / scale));
  for (int j = 0; j < 3; ++j) {
    if (j != k) a[j] = b(k, j) / (scale * a[k]);
  }
  a.normalize();
  // sin(theta) > 0 here, so w = sin(theta) a fixes the overall sign.
  if (w.dot(a) < 0.0) a = -a;
  return theta * a;
}

/// A(Theta): the dexp-inverse block of G(eta); A(Theta) Theta = Theta.
inline Mat3 a_matrix(const Vec3& theta) {
  const double t = theta.norm();
  if (t >= std::numbers::pi - kLogGuard) {
    throw NearPiSingularity("a_matrix: principal angle too close to pi");
  }
  const Mat3 k = hat(theta);
  return Mat3::Identity() + 0.5 * k + detail::a_coeff(t) * (k * k);
}

/// S(Theta): translation block of the SE(3) exponential (left Jacobian).
inline Mat3 s_matrix(const Vec3& theta) {
  const double t = theta.norm();
  const Mat3 k = hat(theta);
  return Mat3::Identity() + detail::cos_coeff(t) * k +
         detail::sin_cubic_coeff(t) * (k * k);
}

/// T(Theta, beta): lower-left block of G(eta). Linear in beta.
inline Mat3 t_matrix(const Vec3& theta, const Vec3& beta) {
  const double t = theta.norm();
  if (t >= std::numbers::pi - kLogGuard) {
    throw NearPiSingularity("t_matrix: principal angle too close to pi");
  }
  const Mat3 a = a_matrix(theta);
  const Vec3 sb = s_matrix(theta) * beta;
  const double tb = theta.dot(beta);
  return 0.5 * hat(sb) * a +
         detail::a_coeff(t) * (theta * beta.transpose() + tb * a) +
         detail::t_coeff2(t) * (sb * theta.transpose()) +
         detail::t_coeff3(t) * tb * (theta * theta.transpose());
}

inline Pose exp_se3(const ExpCoords& eta) {
  return Pose(exp_so3(eta.theta), s_matrix(eta.theta) * eta.beta);
}

/// Logarithm on SE(3); beta = S(Theta)^{-1} b solved numerically.
inline ExpCoords log_se3(const Pose& g) {
  const Vec3 theta = log_so3(g.r);
  const Vec3 beta = s_matrix(theta).partialPivLu().solve(g.b);
  return ExpCoords(theta, beta);
}

/// Adjoint of a pose: Ad_g = [[R, 0], [b^x R, R]].
inline Mat6 adjoint_Ad(const Pose& g) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = g.r.matrix();
  m.bottomRightCorner<3, 3>() = g.r.matrix();
  m.bottomLeftCorner<3, 3>() = hat(g.b) * g.r.matrix();
  return m;
}

/// ad of a twist: [[Omega^x, 0], [v^x, Omega^x]]. ad*_xi = ad(xi)^T.
inline Mat6 ad(const Twist& xi) {
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = hat(xi.omega);
  m.bottomRightCorner<3, 3>() = hat(xi.omega);
  m.bottomLeftCorner<3, 3>() = hat(xi.v);
  return m;
}

inline Mat6 ad(const Vec6& xi) { return ad(Twist(xi)); }

/// G(eta), block form: d/dt eta = G(eta) xi for body twist xi.
/// Satisfies G(eta) eta = eta.
inline Mat6 g_matrix(const ExpCoords& eta) {
  const Mat3 a = a_matrix(eta.theta);
  Mat6 g = Mat6::Zero();
  g.topLeftCorner<3, 3>() = a;
  g.bottomRightCorner<3, 3>() = a;
  g.bottomLeftCorner<3, 3>() = t_matrix(eta.theta, eta.beta);
  return g;
}

/// G(eta) via the ad-power series I + ad/2 + alpha ad^2 + beta ad^4.
/// Alternate route to g_matrix; ill-conditioned for very small theta.
inline Mat6 g_matrix_ad_series(const ExpCoords& eta) {
  const double t = eta.principal_angle();
  if (t >= std::numbers::pi - kLogGuard) {
    throw NearPiSingularity("g_matrix_ad_series: angle too close to pi");
  }
  const double half = 0.5 * t;
  const double cot_half = std::cos(half) / std::sin(half);
  const double csc2_half = 1.0 / (std::sin(half) * std::sin(half));
  const double alpha =
      2.0 / (t * t) - 3.0 / (4.0 * t) * cot_half - csc2_half / 8.0;
  // cot term over 4 t^3: follows from Hermite interpolation of
  // (x/2)coth(x/2) + x/2 on the spectrum of ad_eta
  const double beta = 1.0 / (t * t * t * t) -
                      cot_half / (4.0 * t * t * t) -
                      csc2_half / (8.0 * t * t);
  const Mat6 adeta = ad(eta.vector());
  const Mat6 ad2 = adeta * adeta;
  return Mat6::Identity() + 0.5 * adeta + alpha * ad2 + beta * (ad2 * ad2);
}

inline double principal_angle(const Rotation& r) { return r.principal_angle(); }

/// Right Jacobian of SO(3): exp((x + d)^x) ~ exp(x^x) exp((J_r(x) d)^x).
inline Mat3 so3_right_jacobian(const Vec3& x) {
  return s_matrix(-x);
}

}  // namespace geoest
