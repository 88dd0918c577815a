#pragma once

#include "dorsal/hand_model.hpp"

#include <Eigen/Core>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace dorsal {

struct PosePair {
  HandState predicted;
  HandState ground_truth;
  std::optional<Points3d> predicted_keypoints = std::nullopt;
  std::optional<Points3d> ground_truth_keypoints = std::nullopt;
};

enum class AngularError {
  /// Angle of the relative rotation R_pred^T R_gt.
  Geodesic,
  /// Mean absolute difference of the intrinsic XYZ Euler components.
  PerAxisEuler,
};

struct JointAngleErrors {
  std::array<double, kNumArticulated> per_joint_deg{};
  double mean_deg = 0.0;
};

/// Per-joint angular error over the 15 articulated joints, in degrees. The
/// global orientation is not a joint and is ignored.
JointAngleErrors mpjae(const PosePair& pair, AngularError mode = AngularError::Geodesic);

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

/// Least-squares similarity (proper rotation, uniform scale) taking `from`
/// onto `to`. Throws on coincident or collinear point sets.
SimilarityTransform procrustes_similarity(const Points3d& from, const Points3d& to);

/// Mean per-point distance, meters in, millimeters out.
double mpjpe_mm(const Points3d& pred, const Points3d& gt);
/// Mean per-point distance after aligning pred onto gt with
/// procrustes_similarity, in millimeters.
double pa_mpjpe_mm(const Points3d& pred, const Points3d& gt);

/// |J - J_gt|_1 + |theta - theta_gt|_2^2 with keypoints in meters and the pose
/// in radians. Throws when either keypoint set is missing.
double pose_supervision_loss(const PosePair& pair);

struct SeriesComparison {
  std::vector<double> predicted;
  std::vector<double> ground_truth;
  double rmse = 0.0;
};

double rmse(std::span<const double> a, std::span<const double> b);

/// X (flexion) Euler angle of the finger's MCP joint in its own joint frame,
/// in degrees, one value per state. Finger must be index, middle, ring or pinky.
std::vector<double> tap_angles(const RiggedHandTemplate& tmpl, std::span<const HandState> states, Part finger);
SeriesComparison tap_angle_series(const RiggedHandTemplate& tmpl, std::span<const HandState> predicted,
                                  std::span<const HandState> ground_truth, Part finger);

/// Distance between the finger tip and thumb tip keypoints, in millimeters.
/// Finger must be index, middle or ring.
std::vector<double> pinch_distances(std::span<const HandMesh> meshes, Part finger);
SeriesComparison pinch_distance_series(std::span<const HandMesh> predicted, std::span<const HandMesh> ground_truth,
                                       Part finger);

struct MetricReport {
  JointAngleErrors mpjae;
  double pa_mpjpe_mm = 0.0;
  std::map<Part, double> tap_rmse_deg;
  std::map<Part, double> pinch_rmse_mm;
};

/// MPJAE and PA-MPJPE for one frame. Missing keypoints are produced by posing
/// the template.
MetricReport frame_metrics(const RiggedHandTemplate& tmpl, const PosePair& pair,
                           AngularError mode = AngularError::Geodesic);

}  // namespace dorsal
