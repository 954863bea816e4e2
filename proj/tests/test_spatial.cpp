#include <random>

#include <doctest.h>

#include "rbdpipe/spatial.hpp"
#include "support/reference_dynamics.hpp"

using namespace rbdpipe;
using rbdpipe::testing::dense_cross_force;
using rbdpipe::testing::dense_cross_motion;
using rbdpipe::testing::dense_inertia;
using rbdpipe::testing::dense_xform;

namespace {

std::mt19937_64 rng(20240901);

SpatialVector rand_sv() {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
}

SpatialTransform rand_xform() {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 ax = Vec3(u(rng), u(rng), u(rng)).normalized();
  const Mat3 R = Eigen::AngleAxisd(u(rng) * M_PI, ax).toRotationMatrix().transpose();
  return {R, {u(rng), u(rng), u(rng)}};
}

SpatialInertia rand_inertia() {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::uniform_real_distribution<double> c(-0.3, 0.3);
  Mat3 A;
  A << u(rng), c(rng), c(rng), c(rng), u(rng), c(rng), c(rng), c(rng), u(rng);
  const Mat3 Icom = A * A.transpose() + 0.1 * Mat3::Identity();
  return SpatialInertia::from_com(u(rng) + 0.2, Vec3(c(rng), c(rng), c(rng)), Icom);
}

double rel_err(const Vec6& got, const Vec6& want) {
  const double scale = std::max(1e-12, want.norm());
  return (got - want).norm() / scale;
}

}  // namespace

TEST_CASE("cross products: trivial identities") {
  const SpatialVector v = rand_sv();
  CHECK(cross_motion(v, v).isZero(1e-15));

  const SpatialVector wz{{0, 0, 1}, {0, 0, 0}};
  const SpatialVector wx{{1, 0, 0}, {0, 0, 0}};
  const SpatialVector r = cross_motion(wz, wx);
  CHECK(r.angular.isApprox(Vec3(0, 1, 0)));
  CHECK(r.linear.isZero(0));

  CHECK(cross_force(SpatialVector::Zero(), rand_sv()).isZero(0));
}

TEST_CASE("cross products match the dense operators and their duality") {
  for (int k = 0; k < 10000; ++k) {
    const SpatialVector v = rand_sv(), m = rand_sv(), f = rand_sv();
    CHECK(rel_err(cross_motion(v, m).vec(), dense_cross_motion(v) * m.vec()) < 1e-12);
    CHECK(rel_err(cross_force(v, f).vec(), dense_cross_force(v) * f.vec()) < 1e-12);
    CHECK(std::abs(pair(f, cross_motion(v, m)) + pair(cross_force(v, f), m)) <
          1e-12 * (1.0 + f.vec().norm() * m.vec().norm()));
  }
}

TEST_CASE("motion/force transforms match the dense Pluecker matrix") {
  SUBCASE("identity transform") {
    const SpatialVector v = rand_sv();
    CHECK(xform_motion(SpatialTransform::Identity(), v).vec().isApprox(v.vec()));
    CHECK(xform_force_transpose(SpatialTransform::Identity(), v).vec().isApprox(v.vec()));
  }
  SUBCASE("pure translation on a pure angular motion") {
    const Vec3 t(0.3, -0.2, 0.5);
    const SpatialTransform X{Mat3::Identity(), t};
    const Vec3 w(0.4, 1.0, -0.7);
    const SpatialVector out = xform_motion(X, {w, Vec3::Zero()});
    CHECK(out.angular.isApprox(w));
    CHECK(out.linear.isApprox(Vec3(-t.cross(w))));
    CHECK(rel_err(out.vec(), dense_xform(X) * SpatialVector(w, Vec3::Zero()).vec()) < 1e-13);
  }
  SUBCASE("random transforms") {
    for (int k = 0; k < 10000; ++k) {
      const SpatialTransform X = rand_xform();
      const SpatialVector v = rand_sv(), f = rand_sv();
      const Mat6 D = dense_xform(X);
      CHECK(rel_err(xform_motion(X, v).vec(), D * v.vec()) < 1e-13);
      CHECK(rel_err(xform_force_transpose(X, f).vec(), D.transpose() * f.vec()) < 1e-12);
      CHECK(rel_err(xform_force_star(X, f).vec(), D.inverse().transpose() * f.vec()) < 1e-11);
      CHECK(rel_err(xform_motion_inv(X, v).vec(), D.inverse() * v.vec()) < 1e-11);
    }
  }
}

TEST_CASE("transform composition and power pairing invariance") {
  for (int k = 0; k < 2000; ++k) {
    const SpatialTransform X1 = rand_xform(), X2 = rand_xform();
    const SpatialVector v = rand_sv(), f = rand_sv();
    const SpatialVector lhs = xform_motion(X2, xform_motion(X1, v));
    const SpatialVector rhs = xform_motion(X2 * X1, v);
    CHECK(rel_err(lhs.vec(), rhs.vec()) < 1e-12);
    // <X^T f, v> = <f, X v>
    CHECK(std::abs(pair(xform_force_transpose(X1, f), v) - pair(f, xform_motion(X1, v))) <
          1e-11 * (1.0 + f.vec().norm() * v.vec().norm()));
  }
}

TEST_CASE("inertia apply/transform against the dense 6x6 form") {
  SUBCASE("point mass acts like Newton") {
    const SpatialInertia I(2.0, Vec3::Zero(), Mat3::Zero());
    const SpatialVector v{Vec3::Zero(), {1.0, -2.0, 0.5}};
    const SpatialVector out = inertia_apply(I, v);
    CHECK(out.linear.isApprox(Vec3(2.0, -4.0, 1.0)));
    CHECK(out.angular.isZero(0));
  }
  for (int k = 0; k < 10000; ++k) {
    const SpatialInertia I = rand_inertia();
    const SpatialVector v = rand_sv(), w = rand_sv();
    const Mat6 D = dense_inertia(I);
    CHECK(rel_err(inertia_apply(I, v).vec(), D * v.vec()) < 1e-12);
    CHECK(std::abs(pair(inertia_apply(I, v), w) - pair(inertia_apply(I, w), v)) <
          1e-11 * (1.0 + v.vec().norm() * w.vec().norm()));
  }
  for (int k = 0; k < 5000; ++k) {
    const SpatialInertia I = rand_inertia();
    const SpatialTransform X = rand_xform();
    const SpatialInertia J = inertia_transform(X, I);
    CHECK(J.mass == doctest::Approx(I.mass).epsilon(1e-14));
    const Mat6 D = dense_xform(X);
    const Mat6 want = D.transpose() * dense_inertia(I) * D;
    CHECK((dense_inertia(J) - want).norm() < 1e-11 * (1.0 + want.norm()));
    CHECK((J.I - J.I.transpose()).norm() == 0.0);
    CHECK(inertia_transform(SpatialTransform::Identity(), I).h.isApprox(I.h));
  }
}

TEST_CASE("rotation part stays orthonormal through composition") {
  SpatialTransform X = SpatialTransform::Identity();
  for (int k = 0; k < 500; ++k) X = X * rand_xform();
  CHECK((X.R * X.R.transpose() - Mat3::Identity()).norm() < 1e-12);
}
