#pragma once

// Fixed-size 3x3 factorizations and matrix utilities.

#include <so3kit/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace so3kit {

/// m = u * diag(s) * v^T with s(0) >= s(1) >= s(2) >= 0.
///
/// Sign convention: every column of v has its largest-magnitude entry
/// positive (ties go to the lowest row index); the matching column of u
/// carries the compensating sign.
template <typename Scalar>
struct SvdFactors {
  Mat3<Scalar> u;
  Vec3<Scalar> s;
  Mat3<Scalar> v;

  Mat3<Scalar> reconstruct() const { return u * s.asDiagonal() * v.transpose(); }
};

/// m = q * r, q orthogonal, r upper triangular with nonnegative diagonal.
template <typename Scalar>
struct QrFactors {
  Mat3<Scalar> q;
  Mat3<Scalar> r;
};

template <typename Scalar>
struct SymAntisym {
  Mat3<Scalar> sym;
  Mat3<Scalar> antisym;
};

/// Strict upper, diagonal and strict lower parts.
template <typename Scalar>
struct TriangularParts {
  Mat3<Scalar> upper;
  Mat3<Scalar> diag;
  Mat3<Scalar> lower;
};

namespace detail {

inline constexpr int kJacobiMaxSweeps = 30;

template <typename Scalar>
constexpr Scalar jacobi_tolerance() {
  return std::max(Scalar(1e-14), Scalar(4) * std::numeric_limits<Scalar>::epsilon());
}

// Unit vector orthogonal to `a` (assumed unit), built from the coordinate
// axis least aligned with it.
template <typename Scalar>
Vec3<Scalar> orthogonal_unit(const Vec3<Scalar>& a) {
  int axis = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(a(i)) < std::abs(a(axis))) axis = i;
  }
  Vec3<Scalar> w = Vec3<Scalar>::Unit(axis) - a(axis) * a;
  return w.normalized();
}

template <typename Scalar>
void rotate_columns(Mat3<Scalar>& x, int p, int q, Scalar c, Scalar s) {
  const Vec3<Scalar> xp = x.col(p);
  const Vec3<Scalar> xq = x.col(q);
  x.col(p) = c * xp - s * xq;
  x.col(q) = s * xp + c * xq;
}

}  // namespace detail

/// One-sided (Hestenes) Jacobi SVD.
template <typename Derived>
SvdFactors<typename Derived::Scalar> svd3(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3);

  Mat3<Scalar> a = m;
  Mat3<Scalar> v = Mat3<Scalar>::Identity();
  const Scalar tol = detail::jacobi_tolerance<Scalar>();

  for (int sweep = 0; sweep < detail::kJacobiMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Scalar alpha = a.col(p).squaredNorm();
        const Scalar beta = a.col(q).squaredNorm();
        const Scalar gamma = a.col(p).dot(a.col(q));
        if (gamma == Scalar(0) || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        // Rotation angle that zeroes the (p, q) entry of a^T a.
        const Scalar zeta = (beta - alpha) / (Scalar(2) * gamma);
        const Scalar t =
            (zeta >= Scalar(0) ? Scalar(1) : Scalar(-1)) / (std::abs(zeta) + std::hypot(Scalar(1), zeta));
        const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
        const Scalar s = c * t;
        detail::rotate_columns(a, p, q, c, s);
        detail::rotate_columns(v, p, q, c, s);
      }
    }
    if (!rotated) break;
  }

  std::array<Scalar, 3> norms{a.col(0).norm(), a.col(1).norm(), a.col(2).norm()};
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return norms[i] > norms[j]; });

  SvdFactors<Scalar> out;
  Mat3<Scalar> cols;
  for (int j = 0; j < 3; ++j) {
    out.s(j) = norms[order[j]];
    cols.col(j) = a.col(order[j]);
    out.v.col(j) = v.col(order[j]);
  }

  // Left singular vectors: normalized columns, re-orthogonalized, with the
  // last one completed by a cross product so u is orthogonal even when the
  // trailing singular values vanish.
  const Scalar tiny = std::numeric_limits<Scalar>::min() / std::numeric_limits<Scalar>::epsilon();
  if (out.s(0) <= tiny) {
    out.u.setIdentity();
  } else {
    out.u.col(0) = cols.col(0) / out.s(0);
    const Vec3<Scalar> second = cols.col(1) - out.u.col(0).dot(cols.col(1)) * out.u.col(0);
    const Scalar second_norm = second.norm();
    out.u.col(1) = second_norm > tiny ? Vec3<Scalar>(second / second_norm)
                                      : detail::orthogonal_unit<Scalar>(out.u.col(0));
    Vec3<Scalar> third = out.u.col(0).cross(out.u.col(1));
    if (third.dot(cols.col(2)) < Scalar(0)) third = -third;
    out.u.col(2) = third;
  }

  for (int j = 0; j < 3; ++j) {
    int lead = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(out.v(i, j)) > std::abs(out.v(lead, j))) lead = i;
    }
    if (out.v(lead, j) < Scalar(0)) {
      out.v.col(j) = -out.v.col(j);
      out.u.col(j) = -out.u.col(j);
    }
  }
  return out;
}

/// Residual norm below which a Gram-Schmidt column counts as dependent.
inline constexpr double kRankDeficiencyThreshold = 1e-12;

/// Classical Gram-Schmidt on columns, left to right. Each column is
/// projected twice against its predecessors; the second pass only mops up
/// rounding and vanishes in exact arithmetic.
template <typename Derived>
QrFactors<typename Derived::Scalar> qr3(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3);

  QrFactors<Scalar> out{Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero()};
  for (int j = 0; j < 3; ++j) {
    Vec3<Scalar> w = m.col(j);
    for (int pass = 0; pass < 2; ++pass) {
      Vec3<Scalar> coeff = Vec3<Scalar>::Zero();
      for (int i = 0; i < j; ++i) coeff(i) = out.q.col(i).dot(w);
      for (int i = 0; i < j; ++i) {
        w -= coeff(i) * out.q.col(i);
        out.r(i, j) += coeff(i);
      }
    }
    const Scalar norm = w.norm();
    if (!(norm >= Scalar(kRankDeficiencyThreshold))) {
      throw RankDeficientError(j, static_cast<double>(norm));
    }
    out.r(j, j) = norm;
    out.q.col(j) = w / norm;
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar det3(const Eigen::MatrixBase<Derived>& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

template <typename Derived>
typename Derived::Scalar frob_norm(const Eigen::MatrixBase<Derived>& m) {
  return m.norm();
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frob_dist_sq(const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  return (a - b).squaredNorm();
}

/// Symmetric and antisymmetric parts. Both parts are exactly
/// (anti)symmetric; their sum matches m up to one rounding per entry.
template <typename Derived>
SymAntisym<typename Derived::Scalar> split_sym_antisym(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  SymAntisym<Scalar> out{Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero()};
  for (int i = 0; i < 3; ++i) {
    out.sym(i, i) = m(i, i);
    for (int j = i + 1; j < 3; ++j) {
      const Scalar s = (m(i, j) + m(j, i)) / Scalar(2);
      const Scalar a = (m(i, j) - m(j, i)) / Scalar(2);
      out.sym(i, j) = s;
      out.sym(j, i) = s;
      out.antisym(i, j) = a;
      out.antisym(j, i) = -a;
    }
  }
  return out;
}

template <typename Derived>
TriangularParts<typename Derived::Scalar> split_triangular(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  TriangularParts<Scalar> out{Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero(), Mat3<Scalar>::Zero()};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i < j) {
        out.upper(i, j) = m(i, j);
      } else if (i == j) {
        out.diag(i, j) = m(i, j);
      } else {
        out.lower(i, j) = m(i, j);
      }
    }
  }
  return out;
}

}  // namespace so3kit
