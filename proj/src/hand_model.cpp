#include "dorsal/hand_model.hpp"

#include "dorsal/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dorsal {

namespace {

constexpr std::array<std::string_view, kNumParts> kPartNames = {
    "index", "middle", "ring", "pinky", "thumb", "dorsum", "palm"};

}  // namespace

std::string_view part_name(Part p) { return kPartNames[static_cast<std::size_t>(index_of(p))]; }

std::optional<Part> parse_part(std::string_view name) {
  for (Part p : kAllParts) {
    if (part_name(p) == name) return p;
  }
  return std::nullopt;
}

std::array<int, kNumJoints> RiggedHandTemplate::topological_order() const {
  std::array<int, kNumJoints> order{};
  std::array<bool, kNumJoints> placed{};
  int n = 0;
  // At most kNumJoints sweeps for a valid tree.
  for (int sweep = 0; sweep < kNumJoints && n < kNumJoints; ++sweep) {
    for (int j = 0; j < kNumJoints; ++j) {
      if (placed[j]) continue;
      const int p = parents[j];
      if (p < 0 || (p < kNumJoints && placed[p])) {
        order[n++] = j;
        placed[j] = true;
      }
    }
  }
  if (n != kNumJoints) throw InvariantError("hierarchy not a tree: unreachable joints");
  return order;
}

int RiggedHandTemplate::joint_of_keypoint(int k) const {
  const auto& src = keypoint_map.at(static_cast<std::size_t>(k));
  if (src.kind != KeypointSource::Kind::Joint) {
    throw InvariantError("keypoint " + std::to_string(k) + " maps to a vertex, not a joint");
  }
  return src.index;
}

void validate(const RiggedHandTemplate& t) {
  const int nv = t.num_vertices();
  const int nf = t.num_faces();
  if (nv == 0 || nf == 0) throw InvariantError("template has no vertices or faces");
  if (!t.rest_vertices.allFinite()) throw InvariantError("rest vertices not finite");

  if (t.faces.minCoeff() < 0 || t.faces.maxCoeff() >= nv) {
    throw InvariantError("face index out of range");
  }

  int roots = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    const int p = t.parents[j];
    if (p == -1) {
      ++roots;
    } else if (p < 0 || p >= kNumJoints || p == j) {
      throw InvariantError("hierarchy not a tree: bad parent index at joint " + std::to_string(j));
    }
  }
  if (roots != 1 || t.parents[0] != -1) {
    throw InvariantError("hierarchy not a tree: joint 0 must be the single root");
  }
  // Walking up from any joint must reach the root within kNumJoints steps.
  for (int j = 0; j < kNumJoints; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != -1 && steps <= kNumJoints) {
      cur = t.parents[cur];
      ++steps;
    }
    if (cur != -1) throw InvariantError("hierarchy not a tree: cycle through joint " + std::to_string(j));
  }

  if (t.rest_joints.rows() != kNumJoints) throw InvariantError("rest_joints must have 16 rows");

  if (t.skinning_weights.rows() != nv || t.skinning_weights.cols() != kNumJoints) {
    throw InvariantError("skinning weights must be V x 16");
  }
  if (t.skinning_weights.minCoeff() < 0.0) throw InvariantError("weights not normalized: negative weight");
  for (int v = 0; v < nv; ++v) {
    if (std::abs(t.skinning_weights.row(v).sum() - 1.0) > 1e-6) {
      throw InvariantError("weights not normalized: vertex " + std::to_string(v));
    }
  }

  for (std::size_t s = 0; s < t.shape_basis.size(); ++s) {
    if (t.shape_basis[s].rows() != nv || !t.shape_basis[s].allFinite()) {
      throw InvariantError("shape basis " + std::to_string(s) + " must be a finite V x 3 field");
    }
  }

  if (t.joint_regressor.rows() != kNumJoints || t.joint_regressor.cols() != nv) {
    throw InvariantError("joint regressor must be 16 x V");
  }
  for (int j = 0; j < kNumJoints; ++j) {
    if (std::abs(t.joint_regressor.row(j).sum() - 1.0) > 1e-6) {
      throw InvariantError("joint regressor row " + std::to_string(j) + " does not sum to 1");
    }
  }

  if ((t.joint_regressor * t.rest_vertices - t.rest_joints).cwiseAbs().maxCoeff() > 1e-6) {
    throw InvariantError("rest joints inconsistent with joint regressor");
  }

  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto& src = t.keypoint_map[static_cast<std::size_t>(k)];
    const int limit = src.kind == KeypointSource::Kind::Joint ? kNumJoints : nv;
    if (src.index < 0 || src.index >= limit) {
      throw InvariantError("keypoint map entry " + std::to_string(k) + " out of range");
    }
  }
  if (t.keypoint_map[keypoint::kWrist] != KeypointSource{KeypointSource::Kind::Joint, 0}) {
    throw InvariantError("keypoint 0 must be the wrist root joint");
  }

  if (static_cast<int>(t.part_labels.size()) != nf) {
    throw InvariantError("every face needs exactly one part label");
  }

  for (const auto& f : t.joint_frames) {
    if (!f.allFinite() || (f.transpose() * f - Eigen::Matrix3d::Identity()).norm() > 1e-6 ||
        f.determinant() < 0.0) {
      throw InvariantError("joint frames must be proper rotations");
    }
  }
}

bool HandState::is_finite() const {
  return pose.allFinite() && shape.allFinite() && global_orient.allFinite() && translation.allFinite();
}

Points3d shaped_rest_vertices(const RiggedHandTemplate& tmpl, const Eigen::VectorXd& shape) {
  if (shape.size() > tmpl.shape_rank()) {
    throw DimensionError("shape has " + std::to_string(shape.size()) +
                         " coefficients, template basis rank is " + std::to_string(tmpl.shape_rank()));
  }
  Points3d v = tmpl.rest_vertices;
  for (Eigen::Index s = 0; s < shape.size(); ++s) {
    v.noalias() += shape(s) * tmpl.shape_basis[static_cast<std::size_t>(s)];
  }
  return v;
}

Skeleton forward_kinematics(const RiggedHandTemplate& tmpl, const HandState& state) {
  Skeleton sk;
  sk.shaped_vertices = shaped_rest_vertices(tmpl, state.shape);
  sk.rest_joints = tmpl.joint_regressor * sk.shaped_vertices;
  sk.positions.resize(kNumJoints, 3);

  for (int j : tmpl.topological_order()) {
    const int p = tmpl.parents[j];
    if (p < 0) {
      sk.rotations[j] = axis_angle_to_matrix(state.global_orient);
      sk.positions.row(j) = sk.rest_joints.row(j);
    } else {
      const Eigen::Vector3d local = state.pose.row(j - 1).transpose();
      sk.rotations[j] = sk.rotations[p] * axis_angle_to_matrix(local);
      const Eigen::Vector3d offset = (sk.rest_joints.row(j) - sk.rest_joints.row(p)).transpose();
      sk.positions.row(j) = sk.positions.row(p) + (sk.rotations[p] * offset).transpose();
    }
  }
  return sk;
}

Points3d assemble_keypoints(const RiggedHandTemplate& tmpl, const Points3d& vertices,
                            const Points3d& joints) {
  Points3d kp(kNumKeypoints, 3);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto& src = tmpl.keypoint_map[static_cast<std::size_t>(k)];
    kp.row(k) = src.kind == KeypointSource::Kind::Joint ? joints.row(src.index)
                                                        : vertices.row(src.index);
  }
  return kp;
}

HandMesh pose_mesh(const RiggedHandTemplate& tmpl, const HandState& state) {
  if (state.pose.rows() != kNumArticulated) throw DimensionError("pose must have 15 joints");
  const Skeleton sk = forward_kinematics(tmpl, state);

  const int nv = tmpl.num_vertices();
  HandMesh mesh;
  mesh.faces = tmpl.faces;
  mesh.vertices.resize(nv, 3);
  for (int v = 0; v < nv; ++v) {
    const Eigen::Vector3d x = sk.shaped_vertices.row(v).transpose();
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = tmpl.skinning_weights(v, j);
      if (w == 0.0) continue;
      acc += w * (sk.rotations[j] * (x - sk.rest_joints.row(j).transpose()) +
                  sk.positions.row(j).transpose());
    }
    mesh.vertices.row(v) = (acc + state.translation).transpose();
  }
  mesh.joints = tmpl.joint_regressor * mesh.vertices;
  mesh.keypoints21 = assemble_keypoints(tmpl, mesh.vertices, mesh.joints);
  return mesh;
}

const Points3d& keypoints(const HandMesh& mesh) { return mesh.keypoints21; }

Eigen::VectorXd triangle_areas(const Points3d& vertices, const FaceIndices& faces) {
  Eigen::VectorXd areas(faces.rows());
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Eigen::Vector3d a = vertices.row(faces(f, 0)).transpose();
    const Eigen::Vector3d b = vertices.row(faces(f, 1)).transpose();
    const Eigen::Vector3d c = vertices.row(faces(f, 2)).transpose();
    areas(f) = 0.5 * (b - a).cross(c - a).norm();
  }
  return areas;
}

std::array<double, kNumParts> part_areas(const HandMesh& mesh, const RiggedHandTemplate& tmpl) {
  if (mesh.faces.rows() != static_cast<Eigen::Index>(tmpl.part_labels.size())) {
    throw DimensionError("mesh and template face sets differ");
  }
  const Eigen::VectorXd areas = triangle_areas(mesh.vertices, mesh.faces);
  std::array<double, kNumParts> out{};
  for (Eigen::Index f = 0; f < areas.size(); ++f) {
    out[static_cast<std::size_t>(index_of(tmpl.part_labels[static_cast<std::size_t>(f)]))] += areas(f);
  }
  return out;
}

Eigen::Matrix3d local_joint_rotation(const RiggedHandTemplate& tmpl, const HandState& state,
                                     int joint) {
  if (joint < 1 || joint >= kNumJoints) throw DimensionError("joint must be articulated (1..15)");
  const Eigen::Vector3d aa = state.pose.row(joint - 1).transpose();
  const Eigen::Matrix3d& frame = tmpl.joint_frames[static_cast<std::size_t>(joint)];
  return frame.transpose() * axis_angle_to_matrix(aa) * frame;
}

}  // namespace dorsal
