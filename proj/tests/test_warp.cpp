#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "msr/metrics.hpp"
#include "msr/synthetic.hpp"
#include "msr/warp.hpp"
#include "test_support.hpp"

using namespace msr;

namespace {

const CameraIntrinsics kCam = CameraIntrinsics::centered(160, 120, 120.0);
// 90 degree vertical field of view: a 60 degree rotation still overlaps the original view.
const CameraIntrinsics kWide = CameraIntrinsics::centered(160, 120, 60.0);

FrameBundle tilted_frame(double pitch_deg, const CameraIntrinsics& k = kCam) {
  return render_view(reference_scene(), k, CameraPose{tilt_rotation(pitch_deg, TiltAxis::Pitch), Vec3::Zero()});
}

double psnr(const RgbImage& a, const RgbImage& b, std::size_t& count) {
  double se = 0.0;
  count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!a.valid(x, y) || !b.valid(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a.at(x, y)[c]) - b.at(x, y)[c];
        se += d * d;
      }
      ++count;
    }
  }
  const double mse = se / (3.0 * static_cast<double>(count));
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

Scene floor_only() {
  Scene s;
  s.primitives.push_back({PlanePrimitive{Vec3(0.0, 1.4, 0.0), UnitVector3(0.0, -1.0, 0.0), 20.0}, 0.5, {1, 1, 1}});
  return s;
}

}  // namespace

TEST(WarpBundle, IdentityLeavesBundleUnchanged) {
  const FrameBundle b = tilted_frame(20.0);
  const FrameBundle w = warp_bundle(b, Rotation3());
  EXPECT_EQ(w.rgb.pixels(), b.rgb.pixels());
  EXPECT_EQ(w.rgb.mask(), b.rgb.mask());
  EXPECT_EQ(w.depth, b.depth);
  EXPECT_EQ(w.normals.mask(), b.normals.mask());
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (b.normals.valid(x, y)) {
        EXPECT_EQ(w.normals.at(x, y), b.normals.at(x, y));
      }
    }
  }
  EXPECT_EQ(w.gravity.vec(), b.gravity.vec());
}

TEST(WarpBundle, HalfTurnRollRotatesRasters) {
  // principal point at the exact raster center so the half turn maps pixels onto pixels
  const CameraIntrinsics k(100.0, 100.0, 79.5, 59.5, 160, 120);
  const FrameBundle b = tilted_frame(15.0, k);
  const FrameBundle w = warp_bundle(b, Rotation3::about_z(std::numbers::pi));
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const int sx = k.width - 1 - x;
      const int sy = k.height - 1 - y;
      ASSERT_EQ(w.depth.valid(x, y), b.depth.valid(sx, sy));
      if (b.depth.valid(sx, sy)) {
        ASSERT_EQ(w.depth.at(x, y), b.depth.at(sx, sy));
      }
      ASSERT_EQ(w.rgb.valid(x, y), b.rgb.valid(sx, sy));
      if (b.rgb.valid(sx, sy)) {
        ASSERT_EQ(w.rgb.at(x, y), b.rgb.at(sx, sy));
      }
    }
  }
  EXPECT_EQ(w.gravity.z(), b.gravity.z());
  EXPECT_NEAR(w.gravity.x(), -b.gravity.x(), 1e-15);
  EXPECT_NEAR(w.gravity.y(), -b.gravity.y(), 1e-15);
}

// Oracle: render the scene directly from the rotated camera.
TEST(WarpBundle, MatchesDirectRenderAtComposedPose) {
  for (const Scene& scene : {floor_only(), reference_scene()}) {
    const CameraPose pose{tilt_rotation(10.0, TiltAxis::Roll), Vec3::Zero()};
    const FrameBundle b = render_view(scene, kWide, pose);
    const Rotation3 r = Rotation3::about_x(deg2rad(60.0));
    const FrameBundle w = warp_bundle(b, r);
    const FrameBundle truth = render_view(scene, kWide, CameraPose{r * pose.rotation, pose.position});
    EXPECT_LT(w.depth.valid_fraction(), 1.0);
    const auto dm = depth_metrics(truth.depth, w.depth);
    const auto nm = normal_metrics(truth.normals, w.normals);
    EXPECT_GT(dm.count, 1000u);
    EXPECT_LT(dm.abs_rel, 0.01);
    EXPECT_LT(nm.mean_deg, 1.0);
    EXPECT_LE((w.gravity.vec() - truth.gravity.vec()).norm(), 1e-12);
  }
}

TEST(WarpBundle, NormalsStayUnit) {
  std::mt19937_64 rng(2);
  const FrameBundle b = tilted_frame(35.0);
  for (bool bilinear : {false, true}) {
    const FrameBundle w = warp_bundle(b, test::random_rotation(rng, 0.8), WarpOptions{bilinear});
    std::size_t n = 0;
    for (int y = 0; y < w.height(); ++y) {
      for (int x = 0; x < w.width(); ++x) {
        if (!w.normals.valid(x, y)) continue;
        EXPECT_NEAR(w.normals.at(x, y).norm(), 1.0, 1e-6);
        ++n;
      }
    }
    EXPECT_GT(n, 0u);
  }
}

TEST(WarpBundle, ValidFractionNonIncreasingWithTilt) {
  double previous = 2.0;
  for (double pitch : {0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 85.0}) {
    const FrameBundle b = tilted_frame(pitch);
    const double f = warp_bundle(b, rotation_between(b.gravity, UnitVector3(0, 1, 0))).depth.valid_fraction();
    EXPECT_LE(f, previous) << "pitch " << pitch;
    previous = f;
  }
}

TEST(WarpBundle, RoundTripRestoresTexture) {
  std::mt19937_64 rng(42);
  const FrameBundle b = tilted_frame(0.0, CameraIntrinsics::centered(320, 240, 240.0));
  for (int i = 0; i < 5; ++i) {
    const Rotation3 r = test::random_rotation(rng, deg2rad(45.0));
    const FrameBundle back = warp_bundle(warp_bundle(b, r), r.inverse());
    std::size_t count = 0;
    const double p = psnr(b.rgb, back.rgb, count);
    EXPECT_GT(count, 1000u);
    EXPECT_GT(p, 40.0) << "rotation " << i;
  }
}

TEST(Unwarp, IdentityIsIdentity) {
  const FrameBundle b = tilted_frame(25.0);
  EXPECT_EQ(unwarp_depth_prediction(b.depth, kCam, Rotation3()), b.depth);
  const NormalMap n = unwarp_normal_prediction(b.normals, kCam, Rotation3());
  EXPECT_EQ(n.mask(), b.normals.mask());
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      if (b.normals.valid(x, y)) {
        EXPECT_EQ(n.at(x, y), b.normals.at(x, y));
      }
    }
  }
}

TEST(Unwarp, BackwardRaysAreInvalid) {
  // After a 60 degree pitch the top rows (v' <= -cot 60) have ray z factor <= 0.
  const CameraIntrinsics k(100.0, 100.0, 80.0, 60.0, 160, 120);
  DepthMap up(160, 120);
  NormalMap nup(160, 120);
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 160; ++x) {
      up.set(x, y, 2.0);
      nup.set(x, y, Vec3(0, 0, -1));
    }
  }
  const Rotation3 r = Rotation3::about_x(deg2rad(60.0));
  const DepthMap d = unwarp_depth_prediction(up, k, r);
  const NormalMap n = unwarp_normal_prediction(nup, k, r);
  for (int y = 0; y < 120; ++y) {
    const bool backward = ray_z_factor({80.0, static_cast<double>(y)}, k, r) <= kEpsilon;
    EXPECT_EQ(backward, y <= 2) << y;
    for (int x = 0; x < 160 && backward; ++x) {
      EXPECT_FALSE(d.valid(x, y));
      EXPECT_FALSE(n.valid(x, y));
    }
  }
  EXPECT_GT(count_valid(d.mask()), 0u);
  EXPECT_EQ(d.mask(), n.mask());
}

TEST(Unwarp, OracleRoundTrip) {
  for (double pitch : {-60.0, -30.0, 30.0, 60.0}) {
    const FrameBundle b = tilted_frame(pitch, kWide);
    const Rotation3 r = rotation_between(b.gravity, UnitVector3(0, 1, 0));
    const FrameBundle rect = warp_bundle(b, r);
    const DepthMap d = unwarp_depth_prediction(rect.depth, kWide, r);
    const NormalMap n = unwarp_normal_prediction(rect.normals, kWide, r);
    EXPECT_LT(depth_metrics(b.depth, d).abs_rel, 0.01) << pitch;
    EXPECT_LT(normal_metrics(b.normals, n).mean_deg, 1.0) << pitch;
  }
}

TEST(Unwarp, VectorPartInvertsRotation) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Rotation3 r = test::random_rotation(rng, 3.1);
    const Vec3 v = test::random_unit(rng).vec();
    EXPECT_LE((r.inverse() * (r * v) - v).norm(), 1e-9);
  }
}

TEST(Unwarp, SizeMismatchThrows) {
  EXPECT_THROW(unwarp_depth_prediction(DepthMap(10, 10), kCam, Rotation3()), SizeMismatch);
  EXPECT_THROW(unwarp_normal_prediction(NormalMap(10, 10), kCam, Rotation3()), SizeMismatch);
}
