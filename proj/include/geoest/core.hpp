// geoest - common scalar/matrix aliases and error types
#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace geoest {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using MatX = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class NonSkewInput : public Error {
 public:
  using Error::Error;
};

class NearPiSingularity : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class RankDeficientDirections : public Error {
 public:
  using Error::Error;
};

class DegenerateEigenvalues : public Error {
 public:
  using Error::Error;
};

class OriginSingularity : public Error {
 public:
  using Error::Error;
};

class CovarianceBlowup : public Error {
 public:
  using Error::Error;
};

class NewtonNonConvergence : public Error {
 public:
  NewtonNonConvergence(int iterations_, double residual_)
      : Error("Newton solver failed to converge: " +
              std::to_string(iterations_) + " iterations, residual " +
              std::to_string(residual_)),
        iterations(iterations_),
        residual(residual_) {}
  int iterations;
  double residual;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NonMonotoneTimestamps : public Error {
 public:
  using Error::Error;
};

}  // namespace geoest
