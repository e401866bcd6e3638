#pragma once

#include <so3kit/decompositions.hpp>
#include <so3kit/types.hpp>

#include <cmath>
#include <string>

namespace so3kit {

/// Element of O(3): m^T m = I and det(m) = +-1, both within manifold_tolerance.
template <typename Scalar>
class Orthogonal3 {
 public:
  Orthogonal3() : m_(Mat3<Scalar>::Identity()) {}

  template <typename Derived>
  static Orthogonal3 from_matrix(const Eigen::MatrixBase<Derived>& m) {
    const Scalar tol = manifold_tolerance<Scalar>();
    const Scalar residual = orthogonality_residual(m);
    const Scalar det = det3(m);
    if (!m.allFinite() || !(residual <= tol) || !(std::abs(std::abs(det) - Scalar(1)) <= tol)) {
      throw NotOnManifoldError("matrix is not orthogonal (residual " + std::to_string(double(residual)) +
                               ", det " + std::to_string(double(det)) + ")");
    }
    return Orthogonal3(m);
  }

  const Mat3<Scalar>& matrix() const { return m_; }
  Scalar determinant() const { return det3(m_); }

 private:
  explicit Orthogonal3(const Mat3<Scalar>& m) : m_(m) {}
  Mat3<Scalar> m_;
};

/// Element of SO(3). Construction validates; near-orthogonal input within
/// tolerance is kept as-is, never re-projected.
template <typename Scalar>
class Rotation3 {
 public:
  Rotation3() : m_(Mat3<Scalar>::Identity()) {}

  template <typename Derived>
  static Rotation3 from_matrix(const Eigen::MatrixBase<Derived>& m) {
    const Scalar tol = manifold_tolerance<Scalar>();
    const Scalar residual = orthogonality_residual(m);
    const Scalar det = det3(m);
    if (!m.allFinite() || !(residual <= tol) || !(std::abs(det - Scalar(1)) <= tol)) {
      throw NotOnManifoldError("matrix is not a rotation (residual " + std::to_string(double(residual)) +
                               ", det " + std::to_string(double(det)) + ")");
    }
    return Rotation3(m);
  }

  /// Rotation from a (not necessarily unit) quaternion w + xi + yj + zk.
  static Rotation3 from_quaternion(Scalar w, Scalar x, Scalar y, Scalar z) {
    const Scalar n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > Scalar(1e-12))) throw DegenerateInputError("quaternion norm below 1e-12");
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    Mat3<Scalar> m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return from_matrix(m);
  }

  static Rotation3 identity() { return Rotation3(); }

  const Mat3<Scalar>& matrix() const { return m_; }
  Scalar operator()(int i, int j) const { return m_(i, j); }

  Rotation3 inverse() const { return Rotation3(Mat3<Scalar>(m_.transpose())); }

  friend Rotation3 operator*(const Rotation3& a, const Rotation3& b) { return Rotation3(a.m_ * b.m_); }
  friend Vec3<Scalar> operator*(const Rotation3& r, const Vec3<Scalar>& p) { return r.m_ * p; }

 private:
  explicit Rotation3(const Mat3<Scalar>& m) : m_(m) {}
  Mat3<Scalar> m_;
};

using Rot3 = Rotation3<double>;
using OrthogonalMat3 = Orthogonal3<double>;

}  // namespace so3kit
