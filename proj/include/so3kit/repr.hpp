#pragma once

// Rotation representations: unit quaternion, Euler angles (intrinsic XYZ),
// axis-angle, the 5D stereographic and 6D Gram-Schmidt over-parameterizations,
// and the raw 9D matrix projected with svdo_plus.
//
// The maps from raw parameters to matrices are templated on the scalar so
// they can be instantiated with forward-mode autodiff scalars.

#include <so3kit/decompositions.hpp>
#include <so3kit/ortho.hpp>
#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace so3kit {

enum class ReprKind { Quaternion, Euler, AxisAngle, FiveD, SixD, NineD };

inline constexpr ReprKind kAllReprKinds[] = {ReprKind::Quaternion, ReprKind::Euler, ReprKind::AxisAngle,
                                             ReprKind::FiveD,      ReprKind::SixD,  ReprKind::NineD};

constexpr int repr_dimension(ReprKind kind) {
  switch (kind) {
    case ReprKind::Quaternion: return 4;
    case ReprKind::Euler: return 3;
    case ReprKind::AxisAngle: return 3;
    case ReprKind::FiveD: return 5;
    case ReprKind::SixD: return 6;
    case ReprKind::NineD: return 9;
  }
  return 0;
}

constexpr std::string_view repr_name(ReprKind kind) {
  switch (kind) {
    case ReprKind::Quaternion: return "quat";
    case ReprKind::Euler: return "euler";
    case ReprKind::AxisAngle: return "axisangle";
    case ReprKind::FiveD: return "5d";
    case ReprKind::SixD: return "6d";
    case ReprKind::NineD: return "9d";
  }
  return "?";
}

inline std::optional<ReprKind> parse_repr_kind(std::string_view name) {
  for (ReprKind k : kAllReprKinds) {
    if (repr_name(k) == name) return k;
  }
  return std::nullopt;
}

using ReprVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 9, 1>;

/// Raw parameter vector tagged with its representation. Quaternions may be
/// unnormalized; Euler angles are radians (roll about X, pitch about Y, yaw
/// about Z, applied as Rx * Ry * Rz); axis-angle is axis * angle; 6D holds
/// two stacked columns; 9D holds a matrix in row-major order.
class RotationRepr {
 public:
  RotationRepr(ReprKind kind, const ReprVector& values) : kind_(kind), values_(values) {
    if (values_.size() != repr_dimension(kind)) {
      throw std::invalid_argument("representation " + std::string(repr_name(kind)) + " expects " +
                                  std::to_string(repr_dimension(kind)) + " values, got " +
                                  std::to_string(values_.size()));
    }
    if (!values_.allFinite()) throw std::invalid_argument("representation has non-finite entries");
  }

  ReprKind kind() const { return kind_; }
  const ReprVector& values() const { return values_; }

 private:
  ReprKind kind_;
  ReprVector values_;
};

namespace detail {

template <typename Scalar>
double value_of(const Scalar& x) {
  if constexpr (std::is_arithmetic_v<Scalar>) {
    return static_cast<double>(x);
  } else {
    return static_cast<double>(x.value());
  }
}

template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> k;
  k << Scalar(0), -v(2), v(1),  //
      v(2), Scalar(0), -v(0),   //
      -v(1), v(0), Scalar(0);
  return k;
}

}  // namespace detail

inline constexpr double kReprDegeneracyThreshold = 1e-12;

/// (w, x, y, z), normalized before use.
template <typename Scalar>
Mat3<Scalar> quaternion_to_matrix(const Vec4<Scalar>& q) {
  using std::sqrt;
  const Scalar n = sqrt(q.squaredNorm());
  if (!(detail::value_of(n) > kReprDegeneracyThreshold)) {
    throw DegenerateInputError("quaternion norm below 1e-12");
  }
  const Scalar w = q(0) / n, x = q(1) / n, y = q(2) / n, z = q(3) / n;
  const Scalar one(1), two(2);
  Mat3<Scalar> m;
  m << one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y),  //
      two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x),   //
      two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y);
  return m;
}

template <typename Scalar>
Mat3<Scalar> euler_xyz_to_matrix(const Vec3<Scalar>& angles) {
  using std::cos;
  using std::sin;
  const Scalar ca = cos(angles(0)), sa = sin(angles(0));
  const Scalar cb = cos(angles(1)), sb = sin(angles(1));
  const Scalar cc = cos(angles(2)), sc = sin(angles(2));
  const Scalar zero(0), one(1);
  Mat3<Scalar> rx, ry, rz;
  rx << one, zero, zero, zero, ca, -sa, zero, sa, ca;
  ry << cb, zero, sb, zero, one, zero, -sb, zero, cb;
  rz << cc, -sc, zero, sc, cc, zero, zero, zero, one;
  return rx * ry * rz;
}

/// Rodrigues' formula; the zero vector maps to the identity.
template <typename Scalar>
Mat3<Scalar> axis_angle_to_matrix(const Vec3<Scalar>& v) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar theta_sq = v.squaredNorm();
  const Mat3<Scalar> k = detail::skew(v);
  Scalar a, b;  // sin(t)/t and (1 - cos(t))/t^2
  if (detail::value_of(theta_sq) < 1e-12) {
    a = Scalar(1) - theta_sq / Scalar(6);
    b = Scalar(0.5) - theta_sq / Scalar(24);
  } else {
    const Scalar theta = sqrt(theta_sq);
    a = sin(theta) / theta;
    b = (Scalar(1) - cos(theta)) / theta_sq;
  }
  return Mat3<Scalar>::Identity() + a * k + b * (k * k);
}

/// Partial Gram-Schmidt on two columns, third column by cross product.
template <typename Scalar>
Mat3<Scalar> six_d_to_matrix(const Eigen::Matrix<Scalar, 6, 1>& v) {
  using std::sqrt;
  const Vec3<Scalar> a1 = v.template head<3>();
  const Vec3<Scalar> a2 = v.template tail<3>();
  const Scalar n1 = sqrt(a1.squaredNorm());
  if (!(detail::value_of(n1) >= kReprDegeneracyThreshold)) throw RankDeficientError(0, detail::value_of(n1));
  const Vec3<Scalar> b1 = a1 / n1;
  const Vec3<Scalar> w = a2 - b1.dot(a2) * b1;
  const Scalar n2 = sqrt(w.squaredNorm());
  if (!(detail::value_of(n2) >= kReprDegeneracyThreshold)) throw RankDeficientError(1, detail::value_of(n2));
  const Vec3<Scalar> b2 = w / n2;
  Mat3<Scalar> m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

namespace detail {
// Per-coordinate scale applied before the inverse stereographic projection.
inline constexpr double kFiveDScale[3] = {std::numbers::sqrt2 + 1.0, std::numbers::sqrt2 + 1.0,
                                          std::numbers::sqrt2};
}  // namespace detail

/// (a0, a1, p0, p1, p2): the last three are scaled, lifted to S^3 by inverse
/// stereographic projection (new coordinate first), rescaled so the trailing
/// three coordinates have unit norm, and appended to (a0, a1) to form a 6D
/// input.
template <typename Scalar>
Mat3<Scalar> five_d_to_matrix(const Eigen::Matrix<Scalar, 5, 1>& v) {
  using std::sqrt;
  Vec3<Scalar> p;
  for (int i = 0; i < 3; ++i) p(i) = v(2 + i) * Scalar(detail::kFiveDScale[i]);
  const Scalar s2 = p.squaredNorm();
  const Scalar lifted0 = (s2 - Scalar(1)) / (s2 + Scalar(1));
  const Vec3<Scalar> lifted = Scalar(2) * p / (s2 + Scalar(1));
  const Scalar n = sqrt(lifted.squaredNorm());
  if (!(detail::value_of(n) > kReprDegeneracyThreshold)) {
    throw DegenerateInputError("5D stereographic component vanishes");
  }
  Eigen::Matrix<Scalar, 6, 1> six;
  six << v(0), v(1), lifted0 / n, lifted(0) / n, lifted(1) / n, lifted(2) / n;
  return six_d_to_matrix<Scalar>(six);
}

/// Raw parameters to a 3x3 matrix (not validated). 9D requires a
/// floating-point scalar because of the SVD.
template <typename Derived>
Mat3<typename Derived::Scalar> repr_values_to_matrix(ReprKind kind, const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() != repr_dimension(kind)) throw std::invalid_argument("representation size mismatch");
  switch (kind) {
    case ReprKind::Quaternion: return quaternion_to_matrix<Scalar>(v.template head<4>());
    case ReprKind::Euler: return euler_xyz_to_matrix<Scalar>(v.template head<3>());
    case ReprKind::AxisAngle: return axis_angle_to_matrix<Scalar>(v.template head<3>());
    case ReprKind::FiveD: return five_d_to_matrix<Scalar>(v.template head<5>());
    case ReprKind::SixD: return six_d_to_matrix<Scalar>(v.template head<6>());
    case ReprKind::NineD:
      if constexpr (std::is_floating_point_v<Scalar>) {
        Mat3<Scalar> m;
        for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = v(i);
        return svdo_plus(m).matrix();
      } else {
        throw std::invalid_argument("9D map needs a floating-point scalar; use the analytic SVD backward");
      }
  }
  throw std::invalid_argument("unknown representation");
}

inline Rot3 repr_to_rotation(const RotationRepr& r) {
  return Rot3::from_matrix(repr_values_to_matrix(r.kind(), r.values()));
}

/// Canonical unit quaternion (w, x, y, z) with w >= 0; when w == 0 the first
/// nonzero vector component is made positive.
inline Vec4d quaternion_from_rotation(const Rot3& rot) {
  const Mat3d& r = rot.matrix();
  const double tr = r.trace();
  Vec4d q;
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    const double w = 0.5 * std::sqrt(std::max(0.0, 1.0 + tr));
    q << w, (r(2, 1) - r(1, 2)) / (4 * w), (r(0, 2) - r(2, 0)) / (4 * w), (r(1, 0) - r(0, 1)) / (4 * w);
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    const double x = 0.5 * std::sqrt(std::max(0.0, 1.0 + r(0, 0) - r(1, 1) - r(2, 2)));
    q << (r(2, 1) - r(1, 2)) / (4 * x), x, (r(0, 1) + r(1, 0)) / (4 * x), (r(0, 2) + r(2, 0)) / (4 * x);
  } else if (r(1, 1) >= r(2, 2)) {
    const double y = 0.5 * std::sqrt(std::max(0.0, 1.0 - r(0, 0) + r(1, 1) - r(2, 2)));
    q << (r(0, 2) - r(2, 0)) / (4 * y), (r(0, 1) + r(1, 0)) / (4 * y), y, (r(1, 2) + r(2, 1)) / (4 * y);
  } else {
    const double z = 0.5 * std::sqrt(std::max(0.0, 1.0 - r(0, 0) - r(1, 1) + r(2, 2)));
    q << (r(1, 0) - r(0, 1)) / (4 * z), (r(0, 2) + r(2, 0)) / (4 * z), (r(1, 2) + r(2, 1)) / (4 * z), z;
  }
  q.normalize();
  bool flip = q(0) < 0.0;
  if (q(0) == 0.0) {
    for (int i = 1; i < 4; ++i) {
      if (q(i) != 0.0) {
        flip = q(i) < 0.0;
        break;
      }
    }
  }
  if (flip) q = -q;
  return q;
}

/// axis * angle with angle in [0, pi].
inline Vec3d axis_angle_from_rotation(const Rot3& rot) {
  const Vec4d q = quaternion_from_rotation(rot);
  const Vec3d v = q.tail<3>();
  const double n = v.norm();
  if (n == 0.0) return Vec3d::Zero();
  const double angle = 2.0 * std::atan2(n, q(0));
  return v * (angle / n);
}

struct EulerExtraction {
  Vec3d angles;  // roll, pitch, yaw; pitch in [-pi/2, pi/2]
  /// Pitch within 1e-7 of +-pi/2: yaw was set to 0, roll absorbs the rest.
  bool gimbal_lock = false;
};

inline constexpr double kGimbalLockMargin = 1e-7;

inline EulerExtraction euler_from_rotation(const Rot3& rot) {
  const Mat3d& r = rot.matrix();
  const double pitch = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  EulerExtraction out;
  if (std::numbers::pi / 2 - std::abs(pitch) < kGimbalLockMargin) {
    out.gimbal_lock = true;
    out.angles = Vec3d(std::atan2(r(2, 1), r(1, 1)), pitch, 0.0);
  } else {
    out.angles = Vec3d(std::atan2(-r(1, 2), r(2, 2)), pitch, std::atan2(-r(0, 1), r(0, 0)));
  }
  return out;
}

/// Canonical representative of `rot` in the requested representation.
inline RotationRepr rotation_to_repr(const Rot3& rot, ReprKind kind) {
  const Mat3d& r = rot.matrix();
  ReprVector v(repr_dimension(kind));
  switch (kind) {
    case ReprKind::Quaternion: v = quaternion_from_rotation(rot); break;
    case ReprKind::Euler: v = euler_from_rotation(rot).angles; break;
    case ReprKind::AxisAngle: v = axis_angle_from_rotation(rot); break;
    case ReprKind::FiveD: {
      // Inverts five_d_to_matrix: keep the first column, and pick the lift
      // whose stereographic preimage points along the second column.
      const double c = r(2, 0);
      const double rho = c + std::sqrt(c * c + 1.0);
      v << r(0, 0), r(1, 0), rho * r(0, 1) / detail::kFiveDScale[0], rho * r(1, 1) / detail::kFiveDScale[1],
          rho * r(2, 1) / detail::kFiveDScale[2];
      break;
    }
    case ReprKind::SixD: v << r.col(0), r.col(1); break;
    case ReprKind::NineD:
      for (int i = 0; i < 9; ++i) v(i) = r(i / 3, i % 3);
      break;
  }
  return RotationRepr(kind, v);
}

/// Rotation angle of a^T b in [0, pi], i.e. acos((trace(a^T b) - 1) / 2).
/// Evaluated as atan2(sin, cos) so that angles near 0 and pi keep full
/// precision.
inline double geodesic_angle(const Rot3& a, const Rot3& b) {
  const Mat3d q = a.matrix().transpose() * b.matrix();
  const double c = (q.trace() - 1.0) / 2.0;
  const double s = 0.5 * Vec3d(q(2, 1) - q(1, 2), q(0, 2) - q(2, 0), q(1, 0) - q(0, 1)).norm();
  return std::atan2(s, c);
}

}  // namespace so3kit
