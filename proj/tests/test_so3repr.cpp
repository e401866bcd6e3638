#include <doctest.h>

#include <so3kit/ortho.hpp>
#include <so3kit/random.hpp>
#include <so3kit/repr.hpp>

#include "oracles.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>
#include <limits>
#include <numbers>

using namespace so3kit;

namespace {

constexpr double kPi = std::numbers::pi;

RotationRepr make(ReprKind kind, std::initializer_list<double> values) {
  ReprVector v(static_cast<Eigen::Index>(values.size()));
  int i = 0;
  for (double x : values) v(i++) = x;
  return RotationRepr(kind, v);
}

void check_rotation(const Mat3d& m) {
  CHECK(orthogonality_residual(m) <= 1e-9);
  CHECK(std::abs(m.determinant() - 1.0) <= 1e-9);
}

}  // namespace

TEST_CASE("representation names round-trip") {
  for (ReprKind k : kAllReprKinds) CHECK(parse_repr_kind(repr_name(k)) == k);
  CHECK_FALSE(parse_repr_kind("7d").has_value());
}

TEST_CASE("repr_to_rotation examples") {
  CHECK(repr_to_rotation(make(ReprKind::Quaternion, {1, 0, 0, 0})).matrix() == Mat3d::Identity());
  const Mat3d half_turn = Vec3d(1, -1, -1).asDiagonal();
  CHECK((repr_to_rotation(make(ReprKind::AxisAngle, {kPi, 0, 0})).matrix() - half_turn).norm() < 1e-15);
  CHECK(repr_to_rotation(make(ReprKind::SixD, {1, 0, 0, 0, 1, 0})).matrix() == Mat3d::Identity());
  CHECK(repr_to_rotation(make(ReprKind::AxisAngle, {0, 0, 0})).matrix() == Mat3d::Identity());
  CHECK(repr_to_rotation(make(ReprKind::Euler, {0, 0, 0})).matrix() == Mat3d::Identity());
  CHECK(repr_to_rotation(make(ReprKind::NineD, {2, 0, 0, 0, 2, 0, 0, 0, 2})).matrix() == Mat3d::Identity());
}

TEST_CASE("Euler angles compose as Rx * Ry * Rz") {
  const double a = 0.3, b = -0.8, c = 1.9;
  const Mat3d expected = oracle::rodrigues(Vec3d(a, 0, 0)) * oracle::rodrigues(Vec3d(0, b, 0)) *
                         oracle::rodrigues(Vec3d(0, 0, c));
  CHECK((repr_to_rotation(make(ReprKind::Euler, {a, b, c})).matrix() - expected).norm() < 1e-14);
}

TEST_CASE("rotation_to_repr canonical examples") {
  const auto q = rotation_to_repr(Rot3::identity(), ReprKind::Quaternion).values();
  CHECK(q == Vec4d(1, 0, 0, 0));
  const Rot3 half_turn = Rot3::from_matrix(Vec3d(1, -1, -1).asDiagonal().toDenseMatrix());
  const auto aa = rotation_to_repr(half_turn, ReprKind::AxisAngle).values();
  CHECK((aa - Vec3d(kPi, 0, 0)).norm() < 1e-15);
}

TEST_CASE("round trips through every representation") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const Rot3 r = random_rotation(rng);
    for (ReprKind k : kAllReprKinds) {
      const RotationRepr repr = rotation_to_repr(r, k);
      CHECK(geodesic_angle(r, repr_to_rotation(repr)) < 1e-6);
    }
    const Vec4d q = rotation_to_repr(r, ReprKind::Quaternion).values();
    CHECK(q(0) >= 0.0);
    CHECK(q.norm() == doctest::Approx(1.0));
    const auto euler = euler_from_rotation(r);
    CHECK_FALSE(euler.gimbal_lock);
    CHECK(std::abs(euler.angles(1)) <= kPi / 2);
    CHECK(axis_angle_from_rotation(r).norm() <= kPi);
  }
}

TEST_CASE("Euler extraction at gimbal lock") {
  for (double pitch : {kPi / 2, -kPi / 2, kPi / 2 - 1e-9}) {
    const Rot3 r = repr_to_rotation(make(ReprKind::Euler, {0.4, pitch, -0.9}));
    const auto e = euler_from_rotation(r);
    CHECK(e.gimbal_lock);
    CHECK(e.angles(2) == 0.0);
    CHECK(geodesic_angle(r, repr_to_rotation(RotationRepr(ReprKind::Euler, e.angles))) < 1e-6);
  }
}

TEST_CASE("random raw vectors map to valid rotations") {
  Rng rng(32);
  for (ReprKind k : kAllReprKinds) {
    for (int trial = 0; trial < 10000; ++trial) {
      ReprVector v(repr_dimension(k));
      for (int i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
      Mat3d m;
      try {
        m = repr_to_rotation(RotationRepr(k, v)).matrix();
      } catch (const DegenerateInputError&) {
        continue;
      }
      REQUIRE(orthogonality_residual(m) <= 1e-9);
      REQUIRE(std::abs(m.determinant() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("quaternion double cover") {
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec4d q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    const Mat3d a = quaternion_to_matrix<double>(q);
    const Mat3d b = quaternion_to_matrix<double>(-q);
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("6D map is left-equivariant and agrees with gs_plus") {
  Rng rng(34);
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat3d r1 = random_rotation(rng).matrix();
    Mat3d m = random_gaussian_mat3(rng);
    Eigen::Matrix<double, 6, 1> cols, rotated;
    cols << m.col(0), m.col(1);
    rotated << r1 * m.col(0), r1 * m.col(1);
    const Mat3d base = six_d_to_matrix<double>(cols);
    CHECK((six_d_to_matrix<double>(rotated) - r1 * base).norm() < 1e-10);
    CHECK((gs_plus(m).matrix() - base).norm() < 1e-10);
  }
}

TEST_CASE("5D map is continuous and inverts rotation_to_repr") {
  Rng rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix<double, 5, 1> v;
    for (int i = 0; i < 5; ++i) v(i) = rng.gaussian();
    const Mat3d a = five_d_to_matrix<double>(v);
    check_rotation(a);
    Eigen::Matrix<double, 5, 1> dv;
    for (int i = 0; i < 5; ++i) dv(i) = 1e-7 * rng.gaussian();
    CHECK((five_d_to_matrix<double>(Eigen::Matrix<double, 5, 1>(v + dv)) - a).norm() < 1e-4);
  }
}

TEST_CASE("degenerate raw inputs are rejected") {
  CHECK_THROWS_AS(repr_to_rotation(make(ReprKind::Quaternion, {0, 0, 0, 1e-13})), DegenerateInputError);
  CHECK_THROWS_AS(repr_to_rotation(make(ReprKind::SixD, {1, 2, 3, 2, 4, 6})), DegenerateInputError);
  CHECK_THROWS_AS(repr_to_rotation(make(ReprKind::SixD, {0, 0, 0, 0, 1, 0})), DegenerateInputError);
  CHECK_THROWS_AS(repr_to_rotation(make(ReprKind::FiveD, {1, 0, 0, 0, 0})), DegenerateInputError);
  CHECK_THROWS_AS(make(ReprKind::Euler, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(make(ReprKind::Euler, {1, std::numeric_limits<double>::quiet_NaN(), 0}),
                  std::invalid_argument);
}

TEST_CASE("Rot3 validation tolerates float drift only") {
  Mat3d m = Mat3d::Identity();
  m(0, 1) = 1e-10;
  CHECK_NOTHROW(Rot3::from_matrix(m));
  m(0, 1) = 1e-7;
  CHECK_THROWS_AS(Rot3::from_matrix(m), NotOnManifoldError);
  CHECK_THROWS_AS(Rot3::from_matrix(Vec3d(1, 1, -1).asDiagonal().toDenseMatrix()), NotOnManifoldError);
  CHECK_NOTHROW(OrthogonalMat3::from_matrix(Vec3d(1, 1, -1).asDiagonal().toDenseMatrix()));
}

TEST_CASE("geodesic angle") {
  Rng rng(36);
  const Rot3 half_turn = Rot3::from_matrix(Vec3d(1, -1, -1).asDiagonal().toDenseMatrix());
  CHECK(geodesic_angle(Rot3::identity(), half_turn) == doctest::Approx(kPi));
  for (int trial = 0; trial < 1000; ++trial) {
    const Rot3 a = random_rotation(rng);
    const Rot3 b = random_rotation(rng);
    CHECK(geodesic_angle(a, a) < 1e-7);
    const double theta = geodesic_angle(a, b);
    CHECK(std::abs(0.5 * (a.matrix() - b.matrix()).squaredNorm() - (2 - 2 * std::cos(theta))) < 1e-10);
    CHECK(std::abs(theta - geodesic_angle(b, a)) < 1e-12);
  }
  for (int trial = 0; trial < 10000; ++trial) {
    const Rot3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    REQUIRE(geodesic_angle(a, c) <= geodesic_angle(a, b) + geodesic_angle(b, c) + 1e-9);
  }
}

TEST_CASE("maps instantiate with forward-mode autodiff and match finite differences") {
  using Deriv = Eigen::VectorXd;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  Rng rng(37);
  for (ReprKind k : {ReprKind::Quaternion, ReprKind::Euler, ReprKind::AxisAngle, ReprKind::FiveD, ReprKind::SixD}) {
    const int d = repr_dimension(k);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = rng.gaussian();
    Eigen::Matrix<AD, Eigen::Dynamic, 1> xa(d);
    for (int i = 0; i < d; ++i) xa(i) = AD(x(i), d, i);
    const Mat3<AD> out = repr_values_to_matrix(k, xa);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd up = x, down = x;
      up(i) += 1e-6;
      down(i) -= 1e-6;
      const Mat3d fd = (repr_values_to_matrix(k, up) - repr_values_to_matrix(k, down)) / 2e-6;
      for (int e = 0; e < 9; ++e) {
        CHECK(out(e / 3, e % 3).derivatives()(i) == doctest::Approx(fd(e / 3, e % 3)).epsilon(1e-5).scale(1.0));
      }
    }
  }
}
