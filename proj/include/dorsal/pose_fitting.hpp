#pragma once

#include "dorsal/hand_model.hpp"

#include <Eigen/Core>

#include <vector>

namespace dorsal {

struct KeypointTargets {
  Points3d points = Points3d::Zero(kNumKeypoints, 3);
  /// Per-keypoint weight in [0, 1]; missing keypoints carry weight 0.
  Eigen::VectorXd confidence = Eigen::VectorXd::Ones(kNumKeypoints);
};

struct MarkerTargets {
  Points3d points;
  std::vector<int> vertex_ids;
  /// Optional per-marker weight; empty means all ones.
  Eigen::VectorXd confidence;
};

enum class JacobianMode { Analytic, CentralDifference };

struct FitConfig {
  /// Residuals are in meters and the regularizers in radians (or shape
  /// units), so the default weights are small. 1.0 gives the literal
  /// unweighted objective.
  double reg_pose_weight = 1e-8;
  double reg_shape_weight = 1e-8;
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  /// Absolute objective decrease (m^2) below which an accepted step ends the fit.
  double residual_tolerance = 1e-16;
  double damping_init = 1e-4;
  JacobianMode jacobian = JacobianMode::Analytic;
  double fd_step = 1e-6;
  bool record_trace = false;
};

void validate(const FitConfig& cfg);

struct FitLogEntry {
  int iteration = 0;
  double objective = 0.0;
  double damping = 0.0;
  bool accepted = false;
};

struct FitResult {
  HandState state;
  double final_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<FitLogEntry> trace;
};

/// sum_k c_k |J_k - target_k|^2 + w_pose |pose|^2 + w_shape |shape|^2
double objective_keypoints(const RiggedHandTemplate& tmpl, const HandState& state, const KeypointTargets& targets,
                           const FitConfig& cfg);

/// sum_m c_m |V[id_m] - target_m|^2 + w_pose |pose|^2. Shape is not a term.
double objective_markers(const RiggedHandTemplate& tmpl, const HandState& state, const MarkerTargets& targets,
                         const FitConfig& cfg);

/// Levenberg-Marquardt over (pose, global orientation, translation, shape).
FitResult fit(const RiggedHandTemplate& tmpl, const KeypointTargets& targets, const HandState& init,
              const FitConfig& cfg);

/// Levenberg-Marquardt over (pose, global orientation, translation) with the
/// shape of `init` held fixed.
FitResult fit(const RiggedHandTemplate& tmpl, const MarkerTargets& targets, const HandState& init,
              const FitConfig& cfg);

/// Weighted residual vectors whose squared norm is the objective, and their
/// Jacobians with respect to the packed parameter vector
/// [pose (45) | global_orient (3) | translation (3) | shape (keypoints only)].
Eigen::VectorXd keypoint_residuals(const RiggedHandTemplate& tmpl, const HandState& state,
                                   const KeypointTargets& targets, const FitConfig& cfg);
Eigen::MatrixXd keypoint_jacobian(const RiggedHandTemplate& tmpl, const HandState& state,
                                  const KeypointTargets& targets, const FitConfig& cfg);
Eigen::VectorXd marker_residuals(const RiggedHandTemplate& tmpl, const HandState& state,
                                 const MarkerTargets& targets, const FitConfig& cfg);
Eigen::MatrixXd marker_jacobian(const RiggedHandTemplate& tmpl, const HandState& state,
                                const MarkerTargets& targets, const FitConfig& cfg);

/// Derivatives of every posed vertex: `dx`, `dy`, `dz` are V x P with the
/// parameter order above (shape columns included).
struct VertexJacobian {
  Eigen::MatrixXd dx;
  Eigen::MatrixXd dy;
  Eigen::MatrixXd dz;
};
VertexJacobian posed_vertex_jacobian(const RiggedHandTemplate& tmpl, const HandState& state);

inline constexpr int kPoseParams = 3 * kNumArticulated + 6;

}  // namespace dorsal
