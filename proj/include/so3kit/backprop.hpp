#pragma once

// Backward passes for the svdo_plus layer and the rotation losses, plus a
// central finite-difference oracle.

#include <so3kit/decompositions.hpp>
#include <so3kit/ortho.hpp>
#include <so3kit/repr.hpp>
#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>

namespace so3kit {

/// Everything the backward pass needs from the forward pass.
template <typename Scalar>
struct GradContext {
  SvdFactors<Scalar> factors;
  /// Sign of det(U V^T); -1 means the smallest singular direction was flipped.
  Scalar det_sign = Scalar(1);
};

template <typename Scalar>
struct SvdoPlusForward {
  Rotation3<Scalar> rotation;
  GradContext<Scalar> context;
  bool degenerate = false;
};

template <typename Derived>
SvdoPlusForward<typename Derived::Scalar> svdo_plus_forward(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  SvdoPlusForward<Scalar> out;
  out.context.factors = svd3(m);
  const auto& f = out.context.factors;
  out.context.det_sign = det3(f.u) * det3(f.v) < Scalar(0) ? Scalar(-1) : Scalar(1);
  out.rotation = Rotation3<Scalar>::from_matrix(special_orthogonalize(f));
  out.degenerate = svdo_plus_degenerate(m, f);
  return out;
}

/// Smallest admissible |s_i + s_j| in the backward pass; smaller
/// denominators are clamped to this magnitude with their sign kept.
inline constexpr double kGradDenominatorGuard = 1e-9;

template <typename Scalar>
struct SvdoPlusBackward {
  Mat3<Scalar> grad;  ///< dL/dM
  Mat3<Scalar> x;     ///< antisymmetric core K - K^T, K = (U D)^T G V
  bool degenerate = false;
};

/// dL/dM for R = U D V^T given G = dL/dR.
///
/// With U' = U D and signed singular values s' = (s1, s2, d s3), M = U' S' V^T
/// and R = U' V^T. Differentiating M = R (V S' V^T) gives
///   dL/dM = U' Z V^T,  Z_ij = X_ij / (s'_i + s'_j) (i != j),  Z_ii = 0,
/// where X = K - K^T and K = U'^T G V.
template <typename Scalar, typename Derived>
SvdoPlusBackward<Scalar> svdo_plus_backward(const GradContext<Scalar>& ctx, const Eigen::MatrixBase<Derived>& g) {
  const auto& f = ctx.factors;
  Mat3<Scalar> u = f.u;
  Vec3<Scalar> s = f.s;
  if (ctx.det_sign < Scalar(0)) {
    u.col(2) = -u.col(2);
    s(2) = -s(2);
  }
  const Mat3<Scalar> k = u.transpose() * g * f.v;

  SvdoPlusBackward<Scalar> out;
  out.x = k - k.transpose();
  Mat3<Scalar> z = Mat3<Scalar>::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      Scalar den = s(i) + s(j);
      if (std::abs(den) < Scalar(kGradDenominatorGuard)) {
        out.degenerate = true;
        den = den < Scalar(0) ? Scalar(-kGradDenominatorGuard) : Scalar(kGradDenominatorGuard);
      }
      z(i, j) = out.x(i, j) / den;
    }
  }
  out.grad = u * z * f.v.transpose();
  return out;
}

enum class LossKind { Frobenius, Geodesic };

template <typename Scalar>
struct LossValue {
  Scalar value = Scalar(0);
  Mat3<Scalar> grad = Mat3<Scalar>::Zero();
  bool degenerate = false;
};

/// 1/2 ||R - R_t||_F^2, which equals 2 - 2 cos(theta) on SO(3).
template <typename Scalar>
Scalar frobenius_loss(const Rotation3<Scalar>& r, const Rotation3<Scalar>& target) {
  return Scalar(0.5) * frob_dist_sq(r.matrix(), target.matrix());
}

/// Clamp band keeping d(acos)/dc finite at |cos(theta)| = 1.
inline constexpr double kAcosGuard = 1e-7;

template <typename Scalar>
Scalar geodesic_loss(const Rotation3<Scalar>& r, const Rotation3<Scalar>& target) {
  return geodesic_angle(r, target);
}

/// Loss and its gradient with respect to the 3x3 matrix entries of `r`
/// (treated as unconstrained), for the given loss kind.
template <typename DerivedR, typename DerivedT>
LossValue<typename DerivedR::Scalar> rotation_loss(LossKind kind, const Eigen::MatrixBase<DerivedR>& r,
                                                   const Eigen::MatrixBase<DerivedT>& target) {
  using Scalar = typename DerivedR::Scalar;
  LossValue<Scalar> out;
  if (kind == LossKind::Frobenius) {
    out.value = Scalar(0.5) * frob_dist_sq(r, target);
    out.grad = r - target;
  } else {
    const Scalar c = ((r.transpose() * target).trace() - Scalar(1)) / Scalar(2);
    out.value = std::acos(std::clamp(c, Scalar(-1), Scalar(1)));
    const Scalar cg = std::clamp(c, Scalar(-1 + kAcosGuard), Scalar(1 - kAcosGuard));
    out.grad = -target / (Scalar(2) * std::sqrt(Scalar(1) - cg * cg));
  }
  return out;
}

/// Loss of svdo_plus(m) against target, with gradient with respect to m.
template <typename Derived, typename Scalar = typename Derived::Scalar>
LossValue<Scalar> svdo_plus_loss(const Eigen::MatrixBase<Derived>& m, const Rotation3<Scalar>& target,
                                 LossKind kind = LossKind::Frobenius) {
  const auto fwd = svdo_plus_forward(m);
  const auto upstream = rotation_loss(kind, fwd.rotation.matrix(), target.matrix());
  const auto back = svdo_plus_backward(fwd.context, upstream.grad);
  return {upstream.value, back.grad, back.degenerate || fwd.degenerate};
}

/// Central differences, entrywise: (f(m + h e_ij) - f(m - h e_ij)) / 2h.
template <typename F, typename Derived>
Mat3<typename Derived::Scalar> finite_difference_grad(F&& f, const Eigen::MatrixBase<Derived>& m,
                                                      typename Derived::Scalar h) {
  using Scalar = typename Derived::Scalar;
  Mat3<Scalar> grad;
  Mat3<Scalar> probe = m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Scalar saved = probe(i, j);
      probe(i, j) = saved + h;
      const Scalar up = f(probe);
      probe(i, j) = saved - h;
      const Scalar down = f(probe);
      probe(i, j) = saved;
      grad(i, j) = (up - down) / (Scalar(2) * h);
    }
  }
  return grad;
}

/// A representation map evaluated together with its Jacobian.
struct ReprForward {
  Mat3d matrix;
  /// d matrix(i, j) / d v(k) stored at row 3 i + j, column k.
  Eigen::Matrix<double, 9, Eigen::Dynamic> jacobian;
};

namespace detail {

template <int D>
ReprForward repr_forward_fixed(ReprKind kind, const ReprVector& v) {
  using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, D, 1>>;
  Eigen::Matrix<AD, D, 1> x;
  for (int k = 0; k < D; ++k) x(k) = AD(v(k), D, k);
  const Mat3<AD> out = repr_values_to_matrix(kind, x);
  ReprForward f;
  f.jacobian.resize(9, D);
  for (int e = 0; e < 9; ++e) {
    f.matrix(e / 3, e % 3) = out(e / 3, e % 3).value();
    f.jacobian.row(e) = out(e / 3, e % 3).derivatives().transpose();
  }
  return f;
}

}  // namespace detail

/// Forward-mode derivative of the quaternion, Euler, axis-angle, 5D and 6D
/// maps. The 9D map goes through svdo_plus_backward instead.
inline ReprForward repr_forward(ReprKind kind, const ReprVector& v) {
  switch (kind) {
    case ReprKind::Quaternion: return detail::repr_forward_fixed<4>(kind, v);
    case ReprKind::Euler:
    case ReprKind::AxisAngle: return detail::repr_forward_fixed<3>(kind, v);
    case ReprKind::FiveD: return detail::repr_forward_fixed<5>(kind, v);
    case ReprKind::SixD: return detail::repr_forward_fixed<6>(kind, v);
    case ReprKind::NineD: break;
  }
  throw std::invalid_argument("repr_forward does not handle the 9D map");
}

}  // namespace so3kit
