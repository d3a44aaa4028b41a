// geoest - generalized Wahba cost, Lemma-style weight construction,
// the gradient vectors S_L and S_K, critical points and Morse indices.
#pragma once

#include <array>
#include <functional>
#include <utility>

#include "geoest/core.hpp"
#include "geoest/lie.hpp"

namespace geoest {

namespace detail {

// vex(M - M^T) without the skew check; equals 2 * vex of the skew part.
inline Vec3 skew_part_vec(const Mat3& m) {
  return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

inline Mat3X append_unit_cross(const Mat3X& cols) {
  Mat3X out(3, 3);
  out.leftCols<2>() = cols;
  Vec3 c = Vec3(cols.col(0)).cross(Vec3(cols.col(1)));
  const double n = c.norm();
  if (n < 1e-9) {
    throw RankDeficientDirections("direction pair is collinear");
  }
  out.col(2) = c / n;
  return out;
}

}  // namespace detail

/// Known inertial directions, one unit column per sensor. With two
/// sensors the normalized cross product is appended as a third column.
struct DirectionSet {
  Mat3X e;

  static DirectionSet from_columns(const Mat3X& cols) {
    if (cols.cols() < 2) {
      throw DimensionMismatch("DirectionSet needs at least 2 directions");
    }
    DirectionSet out;
    out.e = (cols.cols() == 2) ? detail::append_unit_cross(cols) : cols;
    for (int j = 0; j < out.e.cols(); ++j) {
      if (std::abs(out.e.col(j).norm() - 1.0) > 1e-9) {
        throw Error("DirectionSet columns must be unit vectors");
      }
    }
    Eigen::JacobiSVD<Mat3X> svd(out.e);
    if (svd.singularValues()(2) < 1e-9) {
      throw RankDeficientDirections("DirectionSet is rank deficient");
    }
    return out;
  }

  int count() const { return static_cast<int>(e.cols()); }
};

/// Measured body-frame directions; noise perturbs the column norms, so
/// unit length is not enforced. A k=2 set gets its normalized cross
/// appended, mirroring DirectionSet.
struct BodyMeasurementSet {
  Mat3X u;

  static BodyMeasurementSet from_columns(const Mat3X& cols) {
    if (cols.cols() < 2) {
      throw DimensionMismatch("BodyMeasurementSet needs at least 2 columns");
    }
    BodyMeasurementSet out;
    out.u = (cols.cols() == 2) ? detail::append_unit_cross(cols) : cols;
    return out;
  }

  int count() const { return static_cast<int>(u.cols()); }
};

/// Symmetric positive definite k x k weight matrix.
struct WeightMatrix {
  MatX w;

  static WeightMatrix from_matrix(const MatX& m) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("WeightMatrix must be square");
    }
    if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm())) {
      throw Error("WeightMatrix must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw Error("WeightMatrix must be positive definite");
    }
    WeightMatrix out;
    out.w = m;
    return out;
  }

  static WeightMatrix diagonal(const Eigen::VectorXd& d) {
    return from_matrix(MatX(d.asDiagonal()));
  }
};

/// K = E W E^T with its cached eigendecomposition K = U_E diag(d) U_E^T.
struct KMatrix {
  Mat3 k;
  Mat3 u_e;
  Vec3 d;

  static KMatrix from_parts(const Mat3& u_e, const Vec3& d) {
    check_distinct(d);
    KMatrix out;
    out.u_e = u_e;
    out.d = d;
    out.k = u_e * d.asDiagonal() * u_e.transpose();
    return out;
  }

  static KMatrix from_matrix(const Mat3& k) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(k);
    check_distinct(es.eigenvalues());
    KMatrix out;
    out.k = k;
    out.u_e = es.eigenvectors();
    out.d = es.eigenvalues();
    return out;
  }

 private:
  static void check_distinct(const Vec3& d) {
    if (d.minCoeff() <= 0.0) {
      throw DegenerateEigenvalues("K eigenvalues must be positive");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        if (std::abs(d[i] - d[j]) <= 1e-9) {
          throw DegenerateEigenvalues("K eigenvalues must be distinct");
        }
      }
    }
  }
};

/// C^2 reshaping function for the attitude potential: Phi(0) = 0 and
/// Phi'(x) > 0. The identity is the common choice and lets callers skip
/// evaluating the cost itself (Phi' == 1).
struct PhiFunction {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  bool is_identity = false;

  static PhiFunction identity() {
    PhiFunction f;
    f.phi = [](double x) { return x; };
    f.dphi = [](double) { return 1.0; };
    f.is_identity = true;
    return f;
  }

  static PhiFunction from(std::function<double(double)> phi,
                          std::function<double(double)> dphi) {
    if (std::abs(phi(0.0)) > 1e-12) {
      throw Error("PhiFunction: Phi(0) must be 0");
    }
    for (double x : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0}) {
      if (dphi(x) <= 0.0) {
        throw Error("PhiFunction: Phi' must be positive");
      }
    }
    PhiFunction f;
    f.phi = std::move(phi);
    f.dphi = std::move(dphi);
    return f;
  }
};

/// L = E W (U^m)^T, the attitude matrix feeding S_L.
inline Mat3 attitude_matrix(const BodyMeasurementSet& um, const DirectionSet& e,
                            const WeightMatrix& w) {
  if (um.count() != e.count() || w.w.rows() != e.count()) {
    throw DimensionMismatch("attitude_matrix: inconsistent sensor counts");
  }
  return e.e * w.w * um.u.transpose();
}

/// Wahba's cost 1/2 <E - Rhat U^m, (E - Rhat U^m) W>.
inline double wahba_cost0(const Rotation& rhat, const BodyMeasurementSet& um,
                          const DirectionSet& e, const WeightMatrix& w) {
  if (um.count() != e.count() || w.w.rows() != e.count()) {
    throw DimensionMismatch("wahba_cost0: inconsistent sensor counts");
  }
  const Mat3X diff = e.e - rhat.matrix() * um.u;
  return 0.5 * (diff.transpose() * diff).cwiseProduct(w.w).sum();
}

inline double generalized_cost(const Rotation& rhat,
                               const BodyMeasurementSet& um,
                               const DirectionSet& e, const WeightMatrix& w,
                               const PhiFunction& phi) {
  return phi.phi(wahba_cost0(rhat, um, e, w));
}

/// Lemma-style weight construction: given directions E and distinct
/// positive d = (d1, d2, d3), returns W = V_E W0 V_E^T with the first
/// three diagonal entries of W0 equal to d_i / sigma_i^2 (remaining
/// entries 1), so that K = E W E^T has eigenvalues exactly d with
/// eigenvectors U_E.
inline std::pair<WeightMatrix, KMatrix> build_weights(const DirectionSet& e,
                                                      const Vec3& d) {
  const int k = e.count();
  Eigen::JacobiSVD<MatX> svd(e.e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sigma = svd.singularValues();
  if (sigma(2) < 1e-9 * sigma(0)) {
    throw RankDeficientDirections("build_weights: rank(E) < 3");
  }
  Eigen::VectorXd w0 = Eigen::VectorXd::Ones(k);
  for (int i = 0; i < 3; ++i) {
    if (d[i] <= 0.0) {
      throw DegenerateEigenvalues("build_weights: d must be positive");
    }
    w0(i) = d[i] / (sigma(i) * sigma(i));
  }
  const MatX v = svd.matrixV();
  WeightMatrix w = WeightMatrix::from_matrix(v * w0.asDiagonal() * v.transpose());
  KMatrix km = KMatrix::from_parts(svd.matrixU(), d);
  return {std::move(w), std::move(km)};
}

/// S_L(Rhat) = vex(L^T Rhat - Rhat^T L).
inline Vec3 s_l(const Rotation& rhat, const Mat3& l) {
  const Mat3 m = l.transpose() * rhat.matrix();
  return detail::skew_part_vec(m);
}

/// S_K(Q) = vex(K Q - Q^T K); zero exactly at the critical points of
/// <I - Q, K>.
inline Vec3 s_k(const Rotation& q, const KMatrix& k) {
  const Mat3 m = k.k * q.matrix();
  return detail::skew_part_vec(m);
}

/// Hessian of <I - Q, K> at Q: H_K(Q) = trace(Q^T K) I - Q^T K.
inline Mat3 hessian_k(const Rotation& q, const KMatrix& k) {
  const Mat3 qtk = q.matrix().transpose() * k.k;
  return qtk.trace() * Mat3::Identity() - qtk;
}

struct CriticalPoint {
  Rotation q;
  int index;  // Morse index: negative eigenvalue count of H_K(Q)
};

/// The four critical points {I, Q1, Q2, Q3} of <I - Q, K> with their
/// Morse indices; Q_i = 2 U_E a_i a_i^T U_E^T - I.
inline std::array<CriticalPoint, 4> critical_points(const KMatrix& k) {
  std::array<CriticalPoint, 4> out;
  for (int i = 0; i < 4; ++i) {
    Mat3 q = Mat3::Identity();
    if (i > 0) {
      const Vec3 col = k.u_e.col(i - 1);
      q = 2.0 * col * col.transpose() - Mat3::Identity();
    }
    out[i].q = Rotation::from_matrix_unchecked(q);
    Eigen::SelfAdjointEigenSolver<Mat3> es(hessian_k(out[i].q, k));
    int idx = 0;
    for (int j = 0; j < 3; ++j) {
      if (es.eigenvalues()(j) < 0.0) ++idx;
    }
    out[i].index = idx;
  }
  return out;
}

}  // namespace geoest
