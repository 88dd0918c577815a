#pragma once

#include "dorsal/camera.hpp"
#include "dorsal/hand_model.hpp"
#include "dorsal/stats.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dorsal {

struct RasterConfig {
  int width = 1024;
  int height = 1024;
  /// Slack in meters when comparing a face's depth with the buffer.
  double depth_epsilon = 1e-5;
};

void validate(const RasterConfig& cfg);

struct VisibilityThresholds {
  /// A finger is fully occluded at or below this visible fraction.
  double fully_occluded = 0.10;
  /// A finger is fully visible above this visible fraction.
  double fully_visible = 0.90;
  /// Only one side of a finger can face the camera, so finger fractions are
  /// divided by this and clamped to 1.
  double finger_scale = 0.5;
  /// Apply the two thresholds to the scaled finger fraction (default) or to
  /// the raw one.
  bool threshold_on_scaled = true;
};

struct OcclusionConfig {
  RasterConfig raster;
  VisibilityThresholds thresholds;
};

/// Maps raster pixel (col, row) to image coordinates. The raster covers the
/// projected bounding box of the rasterized faces.
struct RasterGrid {
  double u0 = 0.0;
  double v0 = 0.0;
  double du = 1.0;
  double dv = 1.0;
  int width = 0;
  int height = 0;

  Eigen::Vector2d pixel_center(int col, int row) const {
    return {u0 + (col + 0.5) * du, v0 + (row + 0.5) * dv};
  }
};

/// Faces whose outward normal points at the camera: n . c < 0 where c is the
/// face centroid in camera space (camera at the origin, +z forward).
std::vector<int> backface_filter(const Points3d& vertices_cam, const FaceIndices& faces);
std::vector<int> backface_filter(const HandMesh& mesh_cam);

struct ZBufferResult {
  RasterGrid grid;
  /// Indexed by face; faces not rasterized stay zero / false.
  std::vector<int> won_pixels;
  std::vector<int> covered_pixels;
  std::vector<bool> visible;
  /// Candidate faces dropped because a vertex lies behind the near plane.
  int clipped_faces = 0;
};

/// Two-pass Z-buffer over `candidates`. Pass one stores the nearest
/// perspective-correct depth per pixel centre; pass two counts, per face, the
/// covered pixels where its depth is within depth_epsilon of the buffer.
/// A face too small to cover any pixel centre is sampled once at its
/// projected centroid.
ZBufferResult rasterize_zbuffer(const Points3d& vertices_cam, const FaceIndices& faces,
                                std::span<const int> candidates, const CameraRig& rig, const RasterConfig& cfg);
ZBufferResult rasterize_zbuffer(const HandMesh& mesh_cam, std::span<const int> candidates, const CameraRig& rig,
                                const RasterConfig& cfg);

struct VisibilityReport {
  std::vector<double> per_face_visible_area;
  std::array<double, kNumParts> part_area{};
  std::array<double, kNumParts> part_visible_area{};
  /// visible area / part area.
  std::array<double, kNumParts> raw_visibility{};
  /// raw_visibility with finger entries divided by finger_scale and clamped.
  std::array<double, kNumParts> per_part_visibility{};
  double mean_finger_visibility = 0.0;
  std::array<bool, kNumFingers> fully_occluded{};
  std::array<bool, kNumFingers> fully_visible{};
  std::vector<std::string> warnings;

  int occluded_finger_count() const;
  int visible_finger_count() const;
  double visibility(Part p) const { return per_part_visibility[static_cast<std::size_t>(index_of(p))]; }
};

/// Full per-frame measurement for a mesh given in world coordinates.
VisibilityReport visibility_report(const HandMesh& mesh, const RiggedHandTemplate& tmpl, const CameraRig& rig,
                                   const OcclusionConfig& cfg = {});

/// Builds a report from precomputed per-face visible areas.
VisibilityReport summarize_visibility(const Eigen::VectorXd& face_areas, std::vector<double> visible_areas,
                                      std::span<const Part> labels, const VisibilityThresholds& thresholds);

struct OcclusionAggregate {
  std::size_t frames = 0;
  /// Entry k counts frames with exactly k fully visible fingers.
  std::array<std::size_t, kNumFingers + 1> visible_finger_histogram{};
  /// Entry k counts frames with exactly k fully occluded fingers.
  std::array<std::size_t, kNumFingers + 1> occluded_finger_histogram{};
  /// Dorsum visibility over frames with at least one fully occluded finger.
  std::optional<PercentileSummary> dorsal_when_occluded;
  double occluded_frame_fraction = 0.0;
};

OcclusionAggregate dataset_occlusion_stats(std::span<const VisibilityReport> reports);

}  // namespace dorsal
