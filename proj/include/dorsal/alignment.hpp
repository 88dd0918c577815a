#pragma once

#include "dorsal/common.hpp"
#include "dorsal/raster.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace dorsal {

/// Plane projective transform acting on pixel coordinates (x, y, 1).
/// Stored scaled so that the bottom-right entry is 1 whenever it is nonzero.
class Homography {
 public:
  Homography() = default;
  /// Throws InvariantError when |det| <= 1e-12 after normalization.
  explicit Homography(const Eigen::Matrix3d& m);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Homography inverse() const { return Homography(m_.inverse()); }
  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;

  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  friend Homography operator*(const Homography& a, const Homography& b) { return Homography(a.m_ * b.m_); }

 private:
  Eigen::Matrix3d m_ = Eigen::Matrix3d::Identity();
};

/// Normalized DLT over all correspondences (N >= 4). Throws on fewer points
/// or when the points do not determine a homography.
Homography homography_dlt(const Points2d& src, const Points2d& dst);

/// sqrt(|H s - d|^2 + |H^-1 d - s|^2) in pixels.
double symmetric_transfer_error(const Homography& h, const Eigen::Vector2d& src, const Eigen::Vector2d& dst);

struct RansacConfig {
  double inlier_threshold = 3.0;
  int max_iterations = 2000;
  double confidence = 0.999;
  std::uint64_t seed = 0;
};

void validate(const RansacConfig& cfg);

struct RansacResult {
  Homography model;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

/// Four-point hypotheses drawn with a generator seeded from `cfg.seed`; the
/// model with the most inliers (ties broken by lower summed error) is refit on
/// its inliers. The iteration budget shrinks adaptively with the best inlier
/// ratio seen.
RansacResult estimate_homography(const Points2d& src, const Points2d& dst, const RansacConfig& cfg = {});

struct WarpedPoints {
  Points2d points;
  /// False where the point maps to the line at infinity (|w| < 1e-12); the
  /// coordinates of such rows are NaN.
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;
};
WarpedPoints warp_points(const Homography& h, const Points2d& pts);

/// Resamples `grid` into an out_width x out_height raster where output pixel
/// (col, row) takes the bilinear sample of the input at H^-1 (col, row).
/// Pixel centres sit at integer coordinates; samples outside [0, w-1] x
/// [0, h-1] are 0.
Raster warp_grid(const Homography& h, const Raster& grid, int out_width, int out_height);

struct CropConfig {
  int size = 384;
  /// Fraction of the keypoint bounding-box diagonal added on every side.
  double margin = 0.15;
  /// Wrist plus the five MCP knuckles of the 21-keypoint layout.
  std::vector<int> dorsal_keypoints = {0, 2, 5, 9, 13, 17};
};

struct CropResult {
  Raster image;
  /// Maps input-image pixel coordinates to crop pixel coordinates.
  Homography image_to_crop;
  /// Expanded box (x0, y0, x1, y1) in image pixels.
  std::array<double, 4> box{};
};

/// Axis-aligned box of the dorsal keypoints, expanded by the margin, mapped
/// corner to corner onto a size x size raster.
CropResult dorsal_crop(const Points2d& keypoints2d, const Raster& grid, const CropConfig& cfg = {});

}  // namespace dorsal
