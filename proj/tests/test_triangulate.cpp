#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "fcs/errors.hpp"
#include "fcs/rng.hpp"
#include "fcs/scene.hpp"
#include "fcs/triangulate.hpp"

namespace fcs {
namespace {

ViewObs view_of(const Vec3& landmark, const Vec3& center) {
  return ViewObs{BearingObs::from_direction(landmark - center), center};
}

// Least-squares intersection of two rays through their common perpendicular.
Vec3 two_ray_midpoint(const Vec3& c0, const Vec3& d0, const Vec3& c1, const Vec3& d1) {
  const Vec3 w = c0 - c1;
  const double a = d0.dot(d0), b = d0.dot(d1), c = d1.dot(d1), d = d0.dot(w), e = d1.dot(w);
  const double den = a * c - b * b;
  const double s = (b * e - c * d) / den;
  const double t = (a * e - b * d) / den;
  return 0.5 * ((c0 + s * d0) + (c1 + t * d1));
}

TEST(StackSystem, ShapeAndAnchorRows) {
  const Vec3 p(1.0, -2.0, 25.0);
  std::vector<ViewObs> views;
  const int k = 4;
  for (int i = 0; i < k; ++i) {
    views.push_back(view_of(p, Vec3(0.0, 0.0, 0.1 * i)));        // leader
    views.push_back(view_of(p, Vec3(3.0, 0.0, 0.1 * i)));        // follower
  }
  const LinearSystem s = stack_system(views);
  EXPECT_EQ(s.A.rows(), 6 * k);
  EXPECT_EQ(s.A.cols(), 3);
  EXPECT_EQ(s.b.segment<3>(0), Vec3::Zero());
  EXPECT_THROW(stack_system(std::vector<ViewObs>{views[0]}), InsufficientParallax);
}

TEST(StackSystem, ForwardModelConsistency) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(5, 60));
    std::vector<ViewObs> views;
    for (int i = 0; i < 6; ++i) views.push_back(view_of(p, Vec3(rng.uniform(-3, 3), rng.uniform(-1, 1), rng.uniform(0, 2))));
    const LinearSystem s = stack_system(views);
    EXPECT_LT((s.A * p - s.b).norm(), 1e-10);
  }
}

TEST(SolveGated, TwoParallelCamerasRecoverMidpointLandmark) {
  const Vec3 p(0.0, -1.5, 30.0);
  const Vec3 c0 = Vec3::Zero(), c1(0.0, -3.0, 0.0);
  const std::vector<ViewObs> views{view_of(p, c0), view_of(p, c1)};
  const Landmark lm = solve_gated(stack_system(views));
  const Vec3 oracle = two_ray_midpoint(c0, p - c0, c1, p - c1);
  EXPECT_LT((lm.position - oracle).norm(), 1e-8);
  EXPECT_LT((lm.position - p).norm(), 1e-8);
  EXPECT_GE(lm.condition_number, 1.0);
}

TEST(SolveGated, NoiselessRecoveryOnRandomGeometry) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(5, 60));
    std::vector<ViewObs> views;
    for (int i = 0; i < 4; ++i) views.push_back(view_of(p, Vec3(rng.uniform(-4, 4), rng.uniform(-2, 2), rng.uniform(-1, 1))));
    const Landmark lm = solve_gated(stack_system(views), std::numeric_limits<double>::infinity());
    EXPECT_LT((lm.position - p).norm(), 1e-8);
  }
}

TEST(SolveGated, IdenticalRaysAreRejected) {
  const Vec3 p(0.5, 0.2, 30.0);
  const std::vector<ViewObs> views{view_of(p, Vec3::Zero()), view_of(p, Vec3::Zero())};
  const Landmark lm = solve_gated(stack_system(views));
  EXPECT_TRUE(std::isinf(lm.condition_number));
  EXPECT_FALSE(lm.accepted);
}

TEST(SolveGated, GateThreshold) {
  const Vec3 p(0.0, -1.5, 30.0);
  const std::vector<ViewObs> views{view_of(p, Vec3::Zero()), view_of(p, Vec3(0.0, -3.0, 0.0))};
  const Landmark lm = solve_gated(stack_system(views), 1e9);
  ASSERT_TRUE(lm.accepted);
  EXPECT_FALSE(solve_gated(stack_system(views), 0.5 * lm.condition_number).accepted);
  EXPECT_TRUE(solve_gated(stack_system(views), lm.condition_number).accepted);
}

TEST(ConditionNumber, InvariantUnderRigidTransform) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(5, 60));
    std::vector<Vec3> centers;
    for (int i = 0; i < 5; ++i) centers.emplace_back(rng.uniform(-4, 4), rng.uniform(-2, 2), rng.uniform(-1, 1));
    const Pose T{Rotation::exp(Vec3(rng.gauss(), rng.gauss(), rng.gauss())), Vec3(rng.gauss(9), rng.gauss(9), rng.gauss(9))};
    std::vector<ViewObs> a, b;
    for (const auto& c : centers) {
      a.push_back(view_of(p, c));
      b.push_back(view_of(T * p, T * c));
    }
    const double ca = solve_gated(stack_system(a)).condition_number;
    const double cb = solve_gated(stack_system(b)).condition_number;
    EXPECT_NEAR(cb / ca, 1.0, 1e-6);
  }
}

struct PixelScene {
  CameraIntrinsics K;
  std::vector<Pose> poses;
  Vec3 landmark;
};

PixelScene pixel_scene(Rng& rng) {
  PixelScene s;
  s.landmark = Vec3(rng.uniform(-4, 4), rng.uniform(-3, 3), rng.uniform(15, 40));
  for (int i = 0; i < 3; ++i) {
    s.poses.push_back(Pose{Rotation::exp(Vec3(rng.gauss(0.02), rng.gauss(0.02), rng.gauss(0.02))), Vec3(0.0, 0.0, 0.3 * i)});
    s.poses.push_back(Pose{Rotation::exp(Vec3(rng.gauss(0.02), rng.gauss(0.02), rng.gauss(0.02))), Vec3(3.0, 0.0, 0.3 * i)});
  }
  return s;
}

std::vector<PixelObs> observe(const PixelScene& s, double sigma, Rng& rng) {
  std::vector<PixelObs> out;
  for (const auto& T : s.poses) {
    PixelObs o = project(T.inverse() * s.landmark, s.K);
    o.u += rng.gauss(sigma);
    o.v += rng.gauss(sigma);
    out.push_back(o);
  }
  return out;
}

Landmark linear_solution(const PixelScene& s, const std::vector<PixelObs>& obs) {
  std::vector<ViewObs> views;
  for (std::size_t i = 0; i < obs.size(); ++i) views.push_back(ViewObs::from_pixel(obs[i], s.poses[i], s.K));
  return solve_gated(stack_system(views), std::numeric_limits<double>::infinity());
}

TEST(RefineGn, NoiselessIsFixedPoint) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const PixelScene s = pixel_scene(rng);
    const auto obs = observe(s, 0.0, rng);
    Landmark lm;
    lm.position = s.landmark;
    const Landmark out = refine_gn(lm, obs, s.poses, s.K);
    EXPECT_LT((out.position - s.landmark).norm(), 1e-10);
  }
}

TEST(RefineGn, NoisyRefinementDoesNotRaiseRms) {
  Rng rng(5);
  int improved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const PixelScene s = pixel_scene(rng);
    const auto obs = observe(s, 1.0, rng);
    const Landmark lin = linear_solution(s, obs);
    const Landmark out = refine_gn(lin, obs, s.poses, s.K);
    const double before = reprojection_rms(lin.position, obs, s.poses, s.K);
    const double after = reprojection_rms(out.position, obs, s.poses, s.K);
    EXPECT_LE(after, before);
    if (after < before) ++improved;
  }
  EXPECT_GT(improved, 150);
}

TEST(RefineGn, ReprojectionJacobianMatchesFiniteDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const PixelScene s = pixel_scene(rng);
    const auto obs = observe(s, 1.0, rng);
    const Vec3 p = s.landmark + Vec3(rng.gauss(0.3), rng.gauss(0.3), rng.gauss(0.3));
    Eigen::VectorXd r;
    Eigen::MatrixX3d J;
    reprojection_residuals(p, obs, s.poses, s.K, r, &J);
    const Vec3 grad = 2.0 * J.transpose() * r;
    for (int a = 0; a < 3; ++a) {
      Vec3 pp = p, pm = p;
      pp[a] += 1e-6;
      pm[a] -= 1e-6;
      Eigen::VectorXd rp, rm;
      reprojection_residuals(pp, obs, s.poses, s.K, rp);
      reprojection_residuals(pm, obs, s.poses, s.K, rm);
      const double fd = (rp.squaredNorm() - rm.squaredNorm()) / 2e-6;
      EXPECT_NEAR(grad[a], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(RefineGn, BehindCameraKeepsInput) {
  Rng rng(7);
  const PixelScene s = pixel_scene(rng);
  const auto obs = observe(s, 0.0, rng);
  Landmark lm;
  lm.position = Vec3(0.0, 0.0, -5.0);
  const Landmark out = refine_gn(lm, obs, s.poses, s.K);
  EXPECT_FALSE(out.refined);
  EXPECT_EQ(out.position, lm.position);
}

TEST(ClosedForm, MatchesStackedSolve) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 p(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(5, 60));
    const Vec3 c1(rng.uniform(-5, 5), rng.uniform(-1, 1), rng.uniform(-1, 1));
    // Slightly inconsistent second ray so the two solutions are not both trivially exact.
    const ViewObs v0 = view_of(p, Vec3::Zero());
    const ViewObs v1 = view_of(p + Vec3(rng.gauss(0.1), rng.gauss(0.1), 0.0), c1);
    const Vec3 closed = two_view_closed_form(v0.bearing, v1.bearing, c1);
    const Landmark stacked = solve_gated(stack_system(std::vector<ViewObs>{v0, v1}), std::numeric_limits<double>::infinity());
    EXPECT_LT((closed - stacked.position).norm(), 1e-9 * std::max(1.0, closed.norm()));
  }
}

TEST(ClosedForm, SymmetricMidpointAndParallelRays) {
  const Vec3 p(0.0, -1.5, 30.0), c1(0.0, -3.0, 0.0);
  const Vec3 got = two_view_closed_form(BearingObs::from_direction(p), BearingObs::from_direction(p - c1), c1);
  EXPECT_LT((got - p).norm(), 1e-9);
  const BearingObs z = BearingObs::from_direction(Vec3::UnitZ());
  EXPECT_THROW(two_view_closed_form(z, z, c1), SingularGeometry);
}

SensitivityField canonical_field() {
  SensitivityConfig cfg;
  cfg.plane_spacing = 1.0;
  return sensitivity_gradient(cfg);
}

TEST(Sensitivity, YawDominatesAndBaselineAxisLeadsTranslation) {
  const SensitivityField f = canonical_field();
  ASSERT_EQ(f.rows * f.cols, static_cast<int>(f.landmarks.size()));
  const auto m = f.mean();
  for (std::size_t k = 0; k < 5; ++k) EXPECT_GT(m[5], m[k]);
  EXPECT_GT(m[5], 300.0);
  EXPECT_GT(m[1], m[0]);
  EXPECT_GT(m[1], m[2]);
}

TEST(Sensitivity, CentralLandmarksLessSensitive) {
  const SensitivityField f = canonical_field();
  const int mid = f.cols / 2;
  int ordered = 0;
  for (int r = 0; r < f.rows; ++r) {
    auto total = [&](int c) {
      double s = 0.0;
      for (double g : f.at(r, c)) s += g;
      return s;
    };
    if (total(mid) < total(0) && total(mid) < total(f.cols - 1)) ++ordered;
  }
  EXPECT_GE(ordered, static_cast<int>(std::ceil(0.9 * f.rows)));
}

TEST(Sensitivity, GradientMatchesCoarserStep) {
  SensitivityConfig cfg;
  cfg.plane_spacing = 5.0;
  const SensitivityField a = sensitivity_gradient(cfg);
  cfg.step = 1e-5;
  const SensitivityField b = sensitivity_gradient(cfg);
  for (std::size_t i = 0; i < a.gradient.size(); ++i) {
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(a.gradient[i][k], b.gradient[i][k], 1e-3 * std::max(1.0, a.gradient[i][k]));
  }
}

}  // namespace
}  // namespace fcs
