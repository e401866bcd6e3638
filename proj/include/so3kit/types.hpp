#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace so3kit {

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

using Mat3d = Mat3<double>;
using Vec3d = Vec3<double>;
using Vec4d = Vec4<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A raw representation vector that does not determine a rotation.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Gram-Schmidt hit a column that is (numerically) in the span of its predecessors.
class RankDeficientError : public DegenerateInputError {
 public:
  RankDeficientError(int column, double residual_norm)
      : DegenerateInputError("rank deficient: column " + std::to_string(column) + " residual norm " +
                             std::to_string(residual_norm)),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

/// A matrix claimed to lie on O(3)/SO(3) that drifts beyond tolerance.
class NotOnManifoldError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  DivergedError(long step, double last_grad_norm)
      : Error("training diverged at step " + std::to_string(step) + " (last gradient norm " +
              std::to_string(last_grad_norm) + ")"),
        step_(step),
        last_grad_norm_(last_grad_norm) {}
  long step() const { return step_; }
  double last_grad_norm() const { return last_grad_norm_; }

 private:
  long step_;
  double last_grad_norm_;
};

/// Tolerance used when validating membership of O(3) / SO(3).
template <typename Scalar>
constexpr Scalar manifold_tolerance() {
  if constexpr (std::is_same_v<Scalar, float>) {
    return Scalar(1e-4);
  } else {
    return Scalar(1e-9);
  }
}

/// ||m^T m - I||_F
template <typename Derived>
typename Derived::Scalar orthogonality_residual(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return (m.transpose() * m - Mat3<Scalar>::Identity()).norm();
}

}  // namespace so3kit
