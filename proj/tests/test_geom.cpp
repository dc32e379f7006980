#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "fcs/errors.hpp"
#include "fcs/geom.hpp"
#include "fcs/kdtree.hpp"
#include "fcs/rng.hpp"

namespace fcs {
namespace {

TEST(Rotation, EulerRoundTrip) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Euler e{rng.uniform(-3.0, 3.0), rng.uniform(-1.5, 1.5), rng.uniform(-3.0, 3.0)};
    const Euler back = Rotation::from_euler(e).euler();
    EXPECT_NEAR(back.roll, e.roll, 1e-12);
    EXPECT_NEAR(back.pitch, e.pitch, 1e-12);
    EXPECT_NEAR(back.yaw, e.yaw, 1e-12);
  }
}

TEST(Rotation, EulerIsZyx) {
  const double r = 0.1, p = -0.2, y = 0.3;
  const Mat3 expected = (Rotation::about_z(y) * Rotation::about_y(p) * Rotation::about_x(r)).matrix();
  EXPECT_LT((Rotation::from_euler(r, p, y).matrix() - expected).norm(), 1e-15);
}

TEST(Rotation, ExpLogInverse) {
  const Vec3 w(0.3, -0.7, 1.1);
  EXPECT_LT((Rotation::exp(w).log() - w).norm(), 1e-12);
  EXPECT_NEAR(Rotation::exp(w).angle_to(Rotation::identity()), w.norm(), 1e-12);
}

TEST(Pose, ComposeAndInvert) {
  const Pose a{Rotation::from_euler(0.1, 0.2, 0.3), Vec3(1, 2, 3)};
  const Pose b{Rotation::from_euler(-0.3, 0.1, 1.0), Vec3(-1, 0, 2)};
  const Vec3 x(0.5, -0.4, 2.0);
  EXPECT_LT(((a * b) * x - a * (b * x)).norm(), 1e-12);
  EXPECT_LT((a.inverse() * (a * x) - x).norm(), 1e-12);
}

TEST(Angles, WrapIntoHalfOpenRange) {
  EXPECT_NEAR(wrap_angle(3.0 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 0.0);
  EXPECT_NEAR(wrap_angle(6.2), 6.2 - 2.0 * kPi, 1e-12);
}

TEST(Camera, ProjectUnprojectRoundTrip) {
  const CameraIntrinsics K;
  const Vec3 p(1.2, -0.7, 6.0);
  const PixelObs px = project(p, K);
  EXPECT_NEAR(px.u, 380.0 * 1.2 / 6.0 + 320.0, 1e-12);
  EXPECT_NEAR(px.v, 380.0 * -0.7 / 6.0 + 240.0, 1e-12);
  EXPECT_LT((unproject(px.u, px.v, 6.0, K) - p).norm(), 1e-12);
  EXPECT_LT((pixel_ray(px.u, px.v, K) - p / 6.0).norm(), 1e-12);
}

TEST(Camera, BehindCameraThrows) {
  EXPECT_THROW(project(Vec3(0, 0, -1), CameraIntrinsics{}), BehindCamera);
  EXPECT_THROW(project(Vec3(0, 0, 0), CameraIntrinsics{}), BehindCamera);
}

TEST(Camera, ValidateRejectsBadIntrinsics) {
  CameraIntrinsics K;
  K.fx = 0.0;
  EXPECT_THROW(K.validate(), InvalidArgument);
  K = CameraIntrinsics{};
  K.cx = 700.0;
  EXPECT_THROW(K.validate(), InvalidArgument);
  EXPECT_NO_THROW(CameraIntrinsics{}.validate());
}

TEST(Camera, ForwardMountAxes) {
  const Mat3 R = cam_from_body_forward();
  EXPECT_LT((R * Vec3::UnitX() - Vec3::UnitZ()).norm(), 1e-15);   // forward -> optical axis
  EXPECT_LT((R * Vec3::UnitY() + Vec3::UnitX()).norm(), 1e-15);   // left -> -right
  EXPECT_LT((R * Vec3::UnitZ() + Vec3::UnitY()).norm(), 1e-15);   // up -> -down
}

TEST(Bearing, OrthoAnnihilatesBearing) {
  const BearingObs b = BearingObs::from_direction(Vec3(1, 2, 5));
  EXPECT_NEAR(b.bearing.norm(), 1.0, 1e-15);
  EXPECT_LT((b.ortho * b.bearing).norm(), 1e-15);
  EXPECT_LT((b.ortho - skew(b.bearing)).norm(), 1e-15);
}

TEST(Slerp, MidpointAndEndpoints) {
  const Rotation a = Rotation::identity();
  const Rotation b = Rotation::about_z(kPi / 2);
  EXPECT_LT(slerp(a, b, 0.0).angle_to(a), 1e-12);
  EXPECT_LT(slerp(a, b, 1.0).angle_to(b), 1e-12);
  EXPECT_LT(slerp(a, b, 0.5).angle_to(Rotation::about_z(kPi / 4)), 1e-12);
}

TEST(Seeds, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(42, "imu0"), derive_seed(42, "imu0"));
  EXPECT_NE(derive_seed(42, "imu0"), derive_seed(42, "imu1"));
  EXPECT_NE(derive_seed(42, "imu0"), derive_seed(43, "imu0"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(42, t));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Seeds, ZeroSigmaDrawsNothing) {
  Rng a(5), b(5);
  EXPECT_EQ(a.gauss(0.0), 0.0);
  EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(KdTree, MatchesExhaustiveSearch) {
  Rng rng(3);
  std::vector<Vec3> pts;
  for (int i = 0; i < 700; ++i) pts.emplace_back(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 3));
  const KdTree tree(pts);
  for (int q = 0; q < 500; ++q) {
    const Vec3 x(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-1, 4));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p - x).squaredNorm());
    double d2 = 0.0;
    const std::size_t idx = tree.nearest(x, &d2);
    EXPECT_EQ(d2, best);
    EXPECT_EQ((pts[idx] - x).squaredNorm(), best);
  }
}

TEST(KdTree, DuplicatePoints) {
  const std::vector<Vec3> pts(50, Vec3(1, 1, 1));
  const KdTree tree(pts);
  double d2 = -1.0;
  tree.nearest(Vec3(1, 1, 2), &d2);
  EXPECT_DOUBLE_EQ(d2, 1.0);
}

}  // namespace
}  // namespace fcs
