#include "dorsal/metrics.hpp"

#include "dorsal/rotation.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace dorsal {

namespace {

double wrap_deg(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}

void check_points(const Points3d& a, const Points3d& b) {
  if (a.rows() != b.rows()) throw DimensionError("point sets differ in size");
  if (a.rows() == 0) throw DimensionError("point sets are empty");
  if (!a.allFinite() || !b.allFinite()) throw InvariantError("point sets must be finite");
}

void require_rank2(const Points3d& centered, const char* which) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& s = svd.singularValues();
  if (!(s(0) > 1e-12) || !(s.size() > 1 && s(1) > 1e-9 * s(0))) {
    throw InvariantError(std::string(which) + " points are coincident or collinear");
  }
}

}  // namespace

JointAngleErrors mpjae(const PosePair& pair, AngularError mode) {
  JointAngleErrors out;
  double sum = 0.0;
  for (int j = 0; j < kNumArticulated; ++j) {
    const Eigen::Matrix3d rp = axis_angle_to_matrix(Eigen::Vector3d(pair.predicted.pose.row(j).transpose()));
    const Eigen::Matrix3d rg = axis_angle_to_matrix(Eigen::Vector3d(pair.ground_truth.pose.row(j).transpose()));
    double err = 0.0;
    if (mode == AngularError::Geodesic) {
      err = degrees(rotation_angle_between(rp, rg));
    } else {
      const Eigen::Vector3d ep = euler_xyz(rp);
      const Eigen::Vector3d eg = euler_xyz(rg);
      for (int c = 0; c < 3; ++c) err += std::abs(wrap_deg(degrees(ep(c) - eg(c))));
      err /= 3.0;
    }
    out.per_joint_deg[static_cast<std::size_t>(j)] = err;
    sum += err;
  }
  out.mean_deg = sum / kNumArticulated;
  return out;
}

SimilarityTransform procrustes_similarity(const Points3d& from, const Points3d& to) {
  check_points(from, to);
  if (from.rows() < 3) throw InvariantError("similarity alignment needs at least 3 points");
  const Eigen::RowVector3d mf = from.colwise().mean();
  const Eigen::RowVector3d mt = to.colwise().mean();
  const Points3d a = from.rowwise() - mf;
  const Points3d b = to.rowwise() - mt;
  require_rank2(a, "predicted");
  require_rank2(b, "reference");

  const double n = static_cast<double>(from.rows());
  const Eigen::Matrix3d cov = b.transpose() * a / n;
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
  const double var = a.squaredNorm() / n;

  SimilarityTransform t;
  t.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  t.scale = svd.singularValues().dot(d) / var;
  t.translation = mt.transpose() - t.scale * t.rotation * mf.transpose();
  return t;
}

double mpjpe_mm(const Points3d& pred, const Points3d& gt) {
  check_points(pred, gt);
  return 1000.0 * (pred - gt).rowwise().norm().mean();
}

double pa_mpjpe_mm(const Points3d& pred, const Points3d& gt) {
  const SimilarityTransform t = procrustes_similarity(pred, gt);
  Points3d aligned = (t.scale * pred * t.rotation.transpose()).rowwise() + t.translation.transpose();
  return mpjpe_mm(aligned, gt);
}

double pose_supervision_loss(const PosePair& pair) {
  if (!pair.predicted_keypoints || !pair.ground_truth_keypoints) {
    throw InvariantError("keypoints are required for the supervision loss");
  }
  check_points(*pair.predicted_keypoints, *pair.ground_truth_keypoints);
  const double l1 = (*pair.predicted_keypoints - *pair.ground_truth_keypoints).cwiseAbs().sum();
  const double l2 = (pair.predicted.pose - pair.ground_truth.pose).squaredNorm();
  return l1 + l2;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("series differ in length");
  if (a.empty()) return 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss / static_cast<double>(a.size()));
}

std::vector<double> tap_angles(const RiggedHandTemplate& tmpl, std::span<const HandState> states, Part finger) {
  if (!is_finger(finger) || finger == Part::Thumb) throw InvariantError("tap angles are defined for index..pinky");
  const int joint = tmpl.joint_of_keypoint(keypoint::mcp_of(finger));
  if (joint < 1) throw InvariantError("template MCP keypoint is not an articulated joint");
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(degrees(euler_xyz(local_joint_rotation(tmpl, s, joint))(0)));
  return out;
}

SeriesComparison tap_angle_series(const RiggedHandTemplate& tmpl, std::span<const HandState> predicted,
                                  std::span<const HandState> ground_truth, Part finger) {
  if (predicted.size() != ground_truth.size()) throw DimensionError("tap series differ in length");
  SeriesComparison out;
  out.predicted = tap_angles(tmpl, predicted, finger);
  out.ground_truth = tap_angles(tmpl, ground_truth, finger);
  out.rmse = rmse(out.predicted, out.ground_truth);
  return out;
}

std::vector<double> pinch_distances(std::span<const HandMesh> meshes, Part finger) {
  if (finger != Part::Index && finger != Part::Middle && finger != Part::Ring) {
    throw InvariantError("pinch distances are defined for index, middle and ring");
  }
  const int tip = keypoint::tip_of(finger);
  const int thumb = keypoint::tip_of(Part::Thumb);
  std::vector<double> out;
  out.reserve(meshes.size());
  for (const auto& m : meshes) {
    if (m.keypoints21.rows() != kNumKeypoints) throw DimensionError("mesh has no 21-keypoint set");
    out.push_back(1000.0 * (m.keypoints21.row(tip) - m.keypoints21.row(thumb)).norm());
  }
  return out;
}

SeriesComparison pinch_distance_series(std::span<const HandMesh> predicted, std::span<const HandMesh> ground_truth,
                                       Part finger) {
  if (predicted.size() != ground_truth.size()) throw DimensionError("pinch series differ in length");
  SeriesComparison out;
  out.predicted = pinch_distances(predicted, finger);
  out.ground_truth = pinch_distances(ground_truth, finger);
  out.rmse = rmse(out.predicted, out.ground_truth);
  return out;
}

MetricReport frame_metrics(const RiggedHandTemplate& tmpl, const PosePair& pair, AngularError mode) {
  MetricReport rep;
  rep.mpjae = mpjae(pair, mode);
  const Points3d pred = pair.predicted_keypoints ? *pair.predicted_keypoints
                                                 : pose_mesh(tmpl, pair.predicted).keypoints21;
  const Points3d gt = pair.ground_truth_keypoints ? *pair.ground_truth_keypoints
                                                  : pose_mesh(tmpl, pair.ground_truth).keypoints21;
  rep.pa_mpjpe_mm = pa_mpjpe_mm(pred, gt);
  return rep;
}

}  // namespace dorsal
