#include <doctest.h>

#include <so3kit/backprop.hpp>
#include <so3kit/random.hpp>

#include "oracles.hpp"

#include <cmath>
#include <numbers>

using namespace so3kit;

namespace {

bool well_conditioned(const Mat3d& m) {
  const auto s = oracle::singular_values(m);
  if (s[1] + s[2] <= 0.1) return false;
  if (m.determinant() < 0 && s[1] - s[2] <= 0.1) return false;
  return true;
}

double composed_loss(const Mat3d& m, const Rot3& target, LossKind kind) {
  const Rot3 r = svdo_plus(m);
  return kind == LossKind::Frobenius ? frobenius_loss(r, target) : geodesic_loss(r, target);
}

}  // namespace

TEST_CASE("finite differences of simple functions") {
  auto sq = [](const Mat3d& x) { return x.squaredNorm(); };
  CHECK((finite_difference_grad(sq, Mat3d::Identity(), 1e-4) - 2.0 * Mat3d::Identity()).norm() < 1e-10);

  Rng rng(1);
  const Mat3d a = random_gaussian_mat3(rng);
  const Mat3d b = random_gaussian_mat3(rng);
  auto quad = [&](const Mat3d& x) { return (a * x).trace() + 0.5 * (x.transpose() * b * x).trace(); };
  const Mat3d x0 = random_gaussian_mat3(rng);
  const Mat3d exact = a.transpose() + 0.5 * (b + b.transpose()) * x0;
  CHECK((finite_difference_grad(quad, x0, 1e-4) - exact).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("frobenius loss values") {
  Rng rng(2);
  const Rot3 half_turn = Rot3::from_matrix(Vec3d(1, -1, -1).asDiagonal().toDenseMatrix());
  CHECK(frobenius_loss(Rot3::identity(), half_turn) == doctest::Approx(4.0).epsilon(1e-15));
  for (int trial = 0; trial < 1000; ++trial) {
    const Rot3 a = random_rotation(rng);
    const Rot3 b = random_rotation(rng);
    CHECK(frobenius_loss(a, a) < 1e-28);
    CHECK(std::abs(frobenius_loss(a, b) - (2.0 - 2.0 * std::cos(geodesic_angle(a, b)))) < 1e-10);
  }
}

TEST_CASE("geodesic loss values and gradient") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Rot3 a = random_rotation(rng);
    const Rot3 b = random_rotation(rng);
    CHECK(geodesic_loss(a, a) < 1e-7);
    const double c = ((a.matrix().transpose() * b.matrix()).trace() - 1.0) / 2.0;
    CHECK(std::abs(geodesic_loss(a, b) - std::acos(std::clamp(c, -1.0, 1.0))) < 1e-12);
  }
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Rot3 a = random_rotation(rng);
    const Rot3 b = random_rotation(rng);
    const double theta = geodesic_angle(a, b);
    if (theta < 0.05 || theta > std::numbers::pi - 0.05) continue;
    const auto lv = rotation_loss(LossKind::Geodesic, a.matrix(), b.matrix());
    auto f = [&](const Mat3d& r) { return rotation_loss(LossKind::Geodesic, r, b.matrix()).value; };
    CHECK((finite_difference_grad(f, a.matrix(), 1e-6) - lv.grad).cwiseAbs().maxCoeff() < 1e-5);
    ++checked;
  }
  CHECK(checked > 400);
}

TEST_CASE("svdo_plus backward matches finite differences on well-conditioned inputs") {
  Rng rng(4);
  for (LossKind kind : {LossKind::Frobenius, LossKind::Geodesic}) {
    int checked = 0;
    double worst = 0.0;
    while (checked < 500) {
      const Mat3d m = random_gaussian_mat3(rng);
      const Rot3 target = random_rotation(rng);
      if (!well_conditioned(m)) continue;
      if (kind == LossKind::Geodesic) {
        const double theta = geodesic_angle(svdo_plus(m), target);
        if (theta < 0.05 || theta > std::numbers::pi - 0.05) continue;
      }
      const auto analytic = svdo_plus_loss(m, target, kind);
      auto f = [&](const Mat3d& x) { return composed_loss(x, target, kind); };
      const Mat3d fd = finite_difference_grad(f, m, 1e-5);
      worst = std::max(worst, (fd - analytic.grad).cwiseAbs().maxCoeff());
      ++checked;
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("backward pass structure") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Mat3d m = random_gaussian_mat3(rng);
    const auto fwd = svdo_plus_forward(m);
    const Mat3d g = random_gaussian_mat3(rng);
    const auto back = svdo_plus_backward(fwd.context, g);
    CHECK(back.x == Mat3d(-back.x.transpose()));
    CHECK(svdo_plus_backward(fwd.context, Mat3d::Zero()).grad == Mat3d::Zero());
  }
}

TEST_CASE("gradient vanishes at the loss minimum") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Rot3 r = random_rotation(rng);
    CHECK(svdo_plus_loss(r.matrix(), r).grad.norm() < 1e-10);
  }
}

TEST_CASE("gradient norm grows as the two smallest singular values meet under det < 0") {
  Rng rng(7);
  const Mat3d u = random_rotation(rng).matrix();
  const Mat3d v = random_rotation(rng).matrix();
  const Rot3 target = random_rotation(rng);
  double previous = 0.0;
  for (double gap : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const Mat3d m = u * Vec3d(2.0, 1.0 + gap, -1.0).asDiagonal() * v;
    const double norm = svdo_plus_loss(m, target).grad.norm();
    CHECK(norm > previous);
    previous = norm;
  }
  CHECK(previous > 1e3);

  const Mat3d coincident = u * Vec3d(2.0, 1.0, -1.0).asDiagonal() * v;
  const auto lv = svdo_plus_loss(coincident, target);
  CHECK(lv.degenerate);
  CHECK(lv.grad.allFinite());
}

TEST_CASE("near-rotation stream rarely trips the degeneracy flag") {
  Rng rng(8);
  const int n = 100000;
  int flagged = 0;
  double norm_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Rot3 r = random_rotation(rng);
    const Mat3d m = r.matrix() + 0.05 * random_gaussian_mat3(rng);
    const auto lv = svdo_plus_loss(m, random_rotation(rng));
    if (lv.degenerate) ++flagged;
    norm_sum += lv.grad.norm();
  }
  CHECK(std::isfinite(norm_sum / n));
  CHECK(flagged < n / 1000);
}
