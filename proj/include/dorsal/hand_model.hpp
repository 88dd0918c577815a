#pragma once

#include "dorsal/common.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dorsal {

inline constexpr int kNumJoints = 16;
inline constexpr int kNumArticulated = 15;
inline constexpr int kNumKeypoints = 21;
inline constexpr int kNumParts = 7;

// Face categories. The five fingers come first so they can be iterated as
// the range [0, kNumFingers).
enum class Part : std::uint8_t { Index, Middle, Ring, Pinky, Thumb, Dorsum, Palm };
inline constexpr int kNumFingers = 5;

inline constexpr std::array<Part, kNumParts> kAllParts = {
    Part::Index, Part::Middle, Part::Ring, Part::Pinky, Part::Thumb, Part::Dorsum, Part::Palm};
inline constexpr std::array<Part, kNumFingers> kFingers = {
    Part::Index, Part::Middle, Part::Ring, Part::Pinky, Part::Thumb};

constexpr int index_of(Part p) { return static_cast<int>(p); }
constexpr bool is_finger(Part p) { return index_of(p) < kNumFingers; }

std::string_view part_name(Part p);
std::optional<Part> parse_part(std::string_view name);

// 21-keypoint layout: wrist, then four points per finger from the base
// outwards, thumb first and pinky last.
namespace keypoint {
inline constexpr int kWrist = 0;
/// Index of the first keypoint (CMC for the thumb, MCP otherwise) of a finger.
constexpr int base_of(Part finger) {
  switch (finger) {
    case Part::Thumb: return 1;
    case Part::Index: return 5;
    case Part::Middle: return 9;
    case Part::Ring: return 13;
    case Part::Pinky: return 17;
    default: return -1;
  }
}
/// The knuckle used for tap measurement: MCP for all fingers.
constexpr int mcp_of(Part finger) { return finger == Part::Thumb ? 2 : base_of(finger); }
constexpr int tip_of(Part finger) { return base_of(finger) + 3; }
}  // namespace keypoint

struct KeypointSource {
  enum class Kind : std::uint8_t { Joint, Vertex };
  Kind kind = Kind::Joint;
  int index = 0;

  friend bool operator==(const KeypointSource&, const KeypointSource&) = default;
};

/// Generic linear-blend-skinned hand. Joint 0 is the wrist root; joint j has
/// parent `parents[j]` (-1 for the root).
struct RiggedHandTemplate {
  Points3d rest_vertices;
  FaceIndices faces;
  std::array<int, kNumJoints> parents{};
  Points3d rest_joints;
  /// V x 16, rows sum to one.
  Eigen::MatrixXd skinning_weights;
  /// One V x 3 displacement field per shape coefficient.
  std::vector<Points3d> shape_basis;
  /// 16 x V, rows sum to one.
  Eigen::MatrixXd joint_regressor;
  std::array<KeypointSource, kNumKeypoints> keypoint_map{};
  std::vector<Part> part_labels;
  /// Local frame per joint, columns are the frame axes in template
  /// coordinates. Local X is the flexion axis used for Euler readouts.
  std::array<Eigen::Matrix3d, kNumJoints> joint_frames;
  std::array<std::string, kNumJoints> joint_names;

  int num_vertices() const { return static_cast<int>(rest_vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  int shape_rank() const { return static_cast<int>(shape_basis.size()); }

  /// Joints ordered so every parent precedes its children.
  std::array<int, kNumJoints> topological_order() const;
  /// Joint index that keypoint `k` reads from; throws if it maps to a vertex.
  int joint_of_keypoint(int k) const;
};

/// Throws InvariantError naming the first violated invariant.
void validate(const RiggedHandTemplate& tmpl);

/// Pose in axis-angle form. `pose` row j is the rotation of articulated joint
/// j + 1 relative to its parent, expressed in template axes.
struct HandState {
  Eigen::Matrix<double, kNumArticulated, 3> pose = Eigen::Matrix<double, kNumArticulated, 3>::Zero();
  Eigen::VectorXd shape;
  Eigen::Vector3d global_orient = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static HandState neutral(int shape_rank) {
    HandState s;
    s.shape = Eigen::VectorXd::Zero(shape_rank);
    return s;
  }
  bool is_finite() const;
};

struct HandMesh {
  Points3d vertices;
  FaceIndices faces;
  Points3d joints;
  Points3d keypoints21;
};

/// Per-joint world rotations and positions after forward kinematics.
struct Skeleton {
  std::array<Eigen::Matrix3d, kNumJoints> rotations;
  Points3d positions;      // posed joint centers, before translation
  Points3d rest_joints;    // shaped rest joints
  Points3d shaped_vertices;
};

Points3d shaped_rest_vertices(const RiggedHandTemplate& tmpl, const Eigen::VectorXd& shape);
Skeleton forward_kinematics(const RiggedHandTemplate& tmpl, const HandState& state);

/// V = LBS(shaped rest, FK(global_orient, pose)) + translation, then joints
/// and keypoints are regressed from the posed vertices.
HandMesh pose_mesh(const RiggedHandTemplate& tmpl, const HandState& state);

const Points3d& keypoints(const HandMesh& mesh);
Points3d assemble_keypoints(const RiggedHandTemplate& tmpl, const Points3d& vertices,
                            const Points3d& joints);

Eigen::VectorXd triangle_areas(const Points3d& vertices, const FaceIndices& faces);
std::array<double, kNumParts> part_areas(const HandMesh& mesh, const RiggedHandTemplate& tmpl);

/// Template-local rotation of a joint, R_local = F^T R F, used for Euler
/// readouts in the joint's own frame.
Eigen::Matrix3d local_joint_rotation(const RiggedHandTemplate& tmpl, const HandState& state,
                                     int joint);

}  // namespace dorsal
