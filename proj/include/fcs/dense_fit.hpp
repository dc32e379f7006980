#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "fcs/geom.hpp"

namespace fcs {

/// Metric depth model z = a * exp(b * (d - c)) - offset, fitted against the
/// scale-ambiguous monocular value d.
struct ExpFitParams {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;
  double offset = 0.0;
  double rms = 0.0;
  std::size_t sample_count = 0;
  int iterations = 0;

  static constexpr std::size_t kMinSamples = 6;

  bool valid() const { return a != 0.0 && sample_count >= kMinSamples; }
  double eval(double d) const;
  /// a and c only enter through a * exp(-b c); re-express with another c.
  ExpFitParams with_center(double new_c) const;
  double amplitude_at_zero() const;
};

struct DepthSample {
  double z = 0.0;  // metric depth, meters
  double d = 0.0;  // monocular prediction
  double u = 0.0;
  double v = 0.0;
};

/// Residual z - a exp(b (d - c)) + offset; the sign convention lives here only.
double exp_residual(const ExpFitParams& p, const DepthSample& s);
/// d residual / d (a, b, c, offset).
Eigen::RowVector4d exp_residual_jacobian(const ExpFitParams& p, const DepthSample& s);

struct ExpFitOptions {
  int max_iterations = 200;
  /// Gauge for c. Unset: the mean of the sample d values.
  std::optional<double> center;
  double exponent_guard = 50.0;
};

/// Least-squares fit of the exponential model with analytic Jacobians.
/// Throws InsufficientSamples (N < 6 or fewer than two distinct d) and
/// IllConditioned when no start stays within the exponent guard.
ExpFitParams fit_exponential(std::span<const DepthSample> samples,
                             const ExpFitOptions& options = {});

struct LinearFit {
  double scale = 0.0;
  double bias = 0.0;
  double rms = 0.0;
  double eval(double d) const { return scale * d + bias; }
};

struct QuadraticFit {
  // z = c2 d^2 + c1 d + c0
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
  double rms = 0.0;
  double eval(double d) const { return (c2 * d + c1) * d + c0; }
};

LinearFit fit_linear(std::span<const DepthSample> samples);
QuadraticFit fit_quadratic(std::span<const DepthSample> samples);

inline constexpr double kMinValidDepth = 0.1;

/// Row-major single-channel image; NaN marks invalid pixels.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  DepthImage() = default;
  DepthImage(int w, int h, double fill = std::numeric_limits<double>::quiet_NaN())
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  /// Bilinear lookup; NaN if any neighbour is invalid or out of bounds.
  double sample(double u, double v) const;
};

/// Per-pixel z = model(d); outputs at or below kMinValidDepth become NaN.
DepthImage apply_model(const DepthImage& mono, const std::function<double(double)>& model);
DepthImage apply_fit(const DepthImage& mono, const ExpFitParams& params);

using PointCloud = std::vector<Vec3>;

/// Unprojects every valid pixel (every stride-th in u and v).
PointCloud depth_to_cloud(const DepthImage& depth, const CameraIntrinsics& K, int stride = 1);

/// Mean nearest-neighbour distance from pred to gt. Throws EmptyCloud.
double ucd(std::span<const Vec3> pred, std::span<const Vec3> gt);

/// Convex hull area of the XY projection; zero for collinear input.
double coverage_area(std::span<const Vec3> cloud);

/// Hull vertices (counter-clockwise) of the XY projection.
std::vector<Vec2> convex_hull_xy(std::span<const Vec3> cloud);

struct DepthBand {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr std::array<DepthBand, 4> kDepthBands{
    DepthBand{0.0, 10.0}, DepthBand{10.0, 30.0}, DepthBand{30.0, 50.0}, DepthBand{50.0, 70.0}};

/// Index of the band containing z ([lo, hi), last band closed); -1 outside.
int depth_band_index(double z);

struct BandMetric {
  DepthBand band;
  std::size_t points = 0;
  double ucd = std::numeric_limits<double>::quiet_NaN();
};

/// uCD of pixel-aligned predicted points against the full gt cloud, grouped
/// by the ground-truth depth of each pixel.
std::vector<BandMetric> banded_ucd(const DepthImage& pred, const DepthImage& truth,
                                   const CameraIntrinsics& K, int stride = 1);

}  // namespace fcs
