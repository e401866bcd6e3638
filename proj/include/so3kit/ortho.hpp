#pragma once

// Projections onto O(3) and SO(3): symmetric orthogonalization via SVD
// (svdo, svdo_plus) and Gram-Schmidt via QR (gs, gs_plus).

#include <so3kit/decompositions.hpp>
#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <cmath>

namespace so3kit {

/// |det(M)| below this marks the input as singular.
inline constexpr double kDetZeroThreshold = 1e-12;
/// s(1) - s(2) below this (with det(M) < 0) marks a repeated smallest singular value.
inline constexpr double kMultiplicityGap = 1e-9;

template <typename Scalar>
struct SpecialProjection {
  Rotation3<Scalar> rotation;
  /// M sits on (or numerically at) the set where svdo_plus is discontinuous:
  /// det(M) = 0, or det(M) < 0 with a repeated smallest singular value.
  bool degenerate = false;
};

/// True when M lies in the discontinuity set of svdo_plus.
template <typename Derived>
bool svdo_plus_degenerate(const Eigen::MatrixBase<Derived>& m,
                          const SvdFactors<typename Derived::Scalar>& factors) {
  using Scalar = typename Derived::Scalar;
  const Scalar det = det3(m);
  if (std::abs(det) < Scalar(kDetZeroThreshold)) return true;
  return det < Scalar(0) && factors.s(1) - factors.s(2) < Scalar(kMultiplicityGap);
}

/// U * diag(1, 1, det(U V^T)) * V^T for precomputed factors.
template <typename Scalar>
Mat3<Scalar> special_orthogonalize(const SvdFactors<Scalar>& f) {
  const Scalar d = det3(f.u) * det3(f.v) < Scalar(0) ? Scalar(-1) : Scalar(1);
  const Vec3<Scalar> diag(Scalar(1), Scalar(1), d);
  return f.u * diag.asDiagonal() * f.v.transpose();
}

/// Nearest orthogonal matrix in Frobenius norm: U V^T.
template <typename Derived>
Orthogonal3<typename Derived::Scalar> svdo(const Eigen::MatrixBase<Derived>& m) {
  const auto f = svd3(m);
  return Orthogonal3<typename Derived::Scalar>::from_matrix(f.u * f.v.transpose());
}

template <typename Derived>
SpecialProjection<typename Derived::Scalar> svdo_plus_checked(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const auto f = svd3(m);
  return {Rotation3<Scalar>::from_matrix(special_orthogonalize(f)), svdo_plus_degenerate(m, f)};
}

/// Nearest rotation in Frobenius norm. Use svdo_plus_checked to also get
/// the degeneracy flag.
template <typename Derived>
Rotation3<typename Derived::Scalar> svdo_plus(const Eigen::MatrixBase<Derived>& m) {
  return svdo_plus_checked(m).rotation;
}

/// Q from the QR decomposition. Throws RankDeficientError.
template <typename Derived>
Orthogonal3<typename Derived::Scalar> gs(const Eigen::MatrixBase<Derived>& m) {
  return Orthogonal3<typename Derived::Scalar>::from_matrix(qr3(m).q);
}

/// Q * diag(1, 1, det(Q)): the third column is negated when Q is a reflection.
template <typename Derived>
Rotation3<typename Derived::Scalar> gs_plus(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Mat3<Scalar> q = qr3(m).q;
  if (det3(q) < Scalar(0)) q.col(2) = -q.col(2);
  return Rotation3<Scalar>::from_matrix(q);
}

}  // namespace so3kit
