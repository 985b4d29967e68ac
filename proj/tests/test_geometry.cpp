#include <gtest/gtest.h>

#include <random>

#include "msr/geometry.hpp"
#include "msr/sphere_histogram.hpp"
#include "test_support.hpp"

using namespace msr;

namespace {

void expect_matrix_near(const Mat3& a, const Mat3& b, double tol) {
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), tol) << "a=\n" << a << "\nb=\n" << b;
}

const CameraIntrinsics kCam(100.0, 100.0, 160.0, 120.0, 320, 240);

}  // namespace

TEST(UnitVector3, NormalizesOnConstruction) {
  const UnitVector3 v(3.0, 0.0, 4.0);
  EXPECT_NEAR(v.vec().norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(v.x(), 0.6);
  EXPECT_DOUBLE_EQ(v.z(), 0.8);
}

TEST(UnitVector3, RejectsZeroAndNonFinite) {
  EXPECT_THROW(UnitVector3(0.0, 0.0, 0.0), InvalidArgument);
  EXPECT_THROW(UnitVector3(std::nan(""), 0.0, 1.0), InvalidArgument);
}

TEST(Rotation3, FromMatrixValidates) {
  Mat3 reflect = Mat3::Identity();
  reflect(0, 0) = -1.0;
  EXPECT_THROW(Rotation3::from_matrix(reflect), InvalidArgument);
  EXPECT_THROW(Rotation3::from_matrix(2.0 * Mat3::Identity()), InvalidArgument);
  EXPECT_NO_THROW(Rotation3::from_matrix(test::rodrigues(Vec3(1, 2, 3), 0.7)));
}

TEST(Rotation3, ExpMatchesRodrigues) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Vec3 axis = test::random_unit(rng).vec();
    const double angle = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    expect_matrix_near(Rotation3::exp(axis * angle).matrix(), test::rodrigues(axis, angle), 1e-12);
  }
}

TEST(Rotation3, AngleAndGeodesic) {
  EXPECT_NEAR(Rotation3::about_y(0.3).angle(), 0.3, 1e-12);
  EXPECT_NEAR(Rotation3::about_x(3.0).angle(), 3.0, 1e-12);
  EXPECT_NEAR(geodesic_distance(Rotation3::about_z(0.5), Rotation3::about_z(0.2)), 0.3, 1e-12);
}

TEST(RotationBetween, IdentityWhenEqual) {
  const UnitVector3 z(0, 0, 1);
  expect_matrix_near(rotation_between(z, z).matrix(), Mat3::Identity(), 1e-15);
}

TEST(RotationBetween, QuarterTurnExample) {
  Mat3 expected;
  expected << 1, 0, 0, 0, 0, 1, 0, -1, 0;
  const Rotation3 r = rotation_between(UnitVector3(0, 0, 1), UnitVector3(0, 1, 0));
  expect_matrix_near(r.matrix(), expected, 1e-15);
  EXPECT_LE((r * Vec3(0, 0, 1) - Vec3(0, 1, 0)).norm(), 1e-15);
  expect_matrix_near(r.matrix().transpose() * r.matrix(), Mat3::Identity(), 1e-15);
}

TEST(RotationBetween, AntipodalThrows) {
  EXPECT_THROW(rotation_between(UnitVector3(0, 0, 1), UnitVector3(0, 0, -1)), AntipodalInput);
  // inside the epsilon band: 1 + r.g ~ 5e-9
  const double t = std::sqrt(2.0 * 5e-9);
  EXPECT_THROW(rotation_between(UnitVector3(0, 0, 1), UnitVector3(t, 0, -1)), AntipodalInput);
}

// Oracle: the minimal rotation is the one about g x r by the angle between them.
TEST(RotationBetween, MatchesAxisAngleOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const UnitVector3 g = test::random_unit(rng);
    const UnitVector3 r = test::random_unit(rng);
    if (1.0 + g.dot(r) < 1e-3) continue;
    const Vec3 axis = g.vec().cross(r.vec());
    if (axis.norm() < 1e-9) continue;
    const Mat3 oracle = test::rodrigues(axis, angle_between(g, r));
    expect_matrix_near(rotation_between(g, r).matrix(), oracle, 1e-9);
  }
}

TEST(RotationFromGravityPrincipal, DelegatesAndRoundTrips) {
  const UnitVector3 g(0, 0, 1);
  const UnitVector3 e(0, 1, 0);
  expect_matrix_near(rotation_from_gravity_principal(g, e).matrix(), rotation_between(g, e).matrix(), 0.0);
  expect_matrix_near(rotation_from_gravity_principal(g, g).matrix(), Mat3::Identity(), 1e-15);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    const UnitVector3 a = test::random_unit(rng);
    const UnitVector3 b = test::random_unit(rng);
    if (1.0 + a.dot(b) <= 1e-6) continue;
    const UnitVector3 back = principal_direction(rotation_from_gravity_principal(a, b), a);
    ASSERT_LE((back.vec() - b.vec()).norm(), 1e-9);
  }
}

TEST(Homography, IdentityAndUnitIntrinsics) {
  expect_matrix_near(homography_from_rotation(kCam, Rotation3()), Mat3::Identity(), 1e-15);
  const CameraIntrinsics unit(1.0, 1.0, 0.0, 0.0, 10, 10);
  const Rotation3 r = Rotation3::exp(Vec3(0.1, -0.4, 0.3));
  expect_matrix_near(homography_from_rotation(unit, r), r.matrix(), 1e-15);
}

TEST(Homography, RollFixesPrincipalPoint) {
  const Mat3 h = homography_from_rotation(kCam, Rotation3::about_z(deg2rad(90.0)));
  const Vec3 p = h * Vec3(160.0, 120.0, 1.0);
  EXPECT_NEAR(p.x() / p.z(), 160.0, 1e-12);
  EXPECT_NEAR(p.y() / p.z(), 120.0, 1e-12);
}

TEST(Homography, Composes) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const Rotation3 a = test::random_rotation(rng, 3.0);
    const Rotation3 b = test::random_rotation(rng, 3.0);
    expect_matrix_near(homography_from_rotation(kCam, a * b),
                       homography_from_rotation(kCam, a) * homography_from_rotation(kCam, b), 1e-9);
  }
}

TEST(WarpPoint, Examples) {
  const auto same = warp_point({160.0, 120.0}, kCam, Rotation3());
  ASSERT_TRUE(same);
  EXPECT_DOUBLE_EQ(same->u, 160.0);
  EXPECT_DOUBLE_EQ(same->v, 120.0);

  const auto pitched = warp_point({160.0, 120.0}, kCam, Rotation3::about_x(deg2rad(30.0)));
  ASSERT_TRUE(pitched);
  EXPECT_NEAR(pitched->u, 160.0, 1e-12);
  EXPECT_NEAR(pitched->v, 120.0 - 100.0 * std::tan(deg2rad(30.0)), 1e-9);
  EXPECT_NEAR(pitched->v, 62.2650, 1e-4);

  EXPECT_FALSE(warp_point({160.0, 120.0}, kCam, Rotation3::about_x(deg2rad(90.0))));
}

TEST(WarpPoint, MatchesHomography) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 319.0);
  std::uniform_real_distribution<double> v(0.0, 239.0);
  for (int i = 0; i < 500; ++i) {
    const Rotation3 r = test::random_rotation(rng, 1.0);
    const Pixel x{u(rng), v(rng)};
    const Vec3 h = homography_from_rotation(kCam, r) * Vec3(x.u, x.v, 1.0);
    const auto w = warp_point(x, kCam, r);
    if (!w) {
      EXPECT_LE(h.z(), kEpsilon * 1.01);
      continue;
    }
    EXPECT_NEAR(w->u, h.x() / h.z(), 1e-7);
    EXPECT_NEAR(w->v, h.y() / h.z(), 1e-7);
  }
}

TEST(WarpPoint, InverseRoundTrip) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 319.0);
  std::uniform_real_distribution<double> v(0.0, 239.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const Rotation3 r = test::random_rotation(rng, 1.2);
    const Pixel x{u(rng), v(rng)};
    const auto y = warp_point(x, kCam, r);
    if (!y) continue;
    const auto back = warp_point(*y, kCam, r.inverse());
    if (!back) continue;
    EXPECT_NEAR(back->u, x.u, 1e-6);
    EXPECT_NEAR(back->v, x.v, 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(RayZFactor, Examples) {
  for (double u : {0.0, 17.5, 160.0, 319.0}) {
    for (double v : {0.0, 120.0, 239.0}) EXPECT_EQ(ray_z_factor({u, v}, kCam, Rotation3()), 1.0);
  }
  EXPECT_NEAR(ray_z_factor({160.0, 120.0}, kCam, Rotation3::about_x(deg2rad(30.0))), std::cos(deg2rad(30.0)), 1e-15);
  EXPECT_NEAR(ray_z_factor({160.0, 120.0}, kCam, Rotation3::about_z(1.234)), 1.0, 1e-15);
}

TEST(CameraIntrinsics, Validation) {
  EXPECT_THROW(CameraIntrinsics(0.0, 1.0, 0.0, 0.0, 10, 10), InvalidArgument);
  EXPECT_THROW(CameraIntrinsics(1.0, -1.0, 0.0, 0.0, 10, 10), InvalidArgument);
  EXPECT_THROW(CameraIntrinsics(1.0, 1.0, 0.0, 0.0, 0, 10), InvalidArgument);
  const auto k = CameraIntrinsics::centered(320, 240, 240.0);
  EXPECT_DOUBLE_EQ(k.cx, 160.0);
  EXPECT_DOUBLE_EQ(k.cy, 120.0);
  expect_matrix_near(k.matrix() * k.inverse_matrix(), Mat3::Identity(), 1e-15);
}
