#include "dorsal/synthetic_hand.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <vector>

namespace dorsal {

namespace {

struct FingerSpec {
  Part part;
  int first_joint;
  Eigen::Vector3d base;
  std::array<double, 3> lengths;
  double radius;
  Eigen::Matrix3d frame;  // columns: flexion axis, finger direction, palm normal
};

class MeshBuilder {
 public:
  int add_vertex(const Eigen::Vector3d& p, std::array<double, kNumJoints> weights) {
    vertices_.push_back(p);
    weights_.push_back(weights);
    return static_cast<int>(vertices_.size()) - 1;
  }

  // Adds a triangle oriented so its normal points away from `inside`.
  void add_face(int a, int b, int c, const Eigen::Vector3d& inside, Part part) {
    const Eigen::Vector3d n = (vertices_[b] - vertices_[a]).cross(vertices_[c] - vertices_[a]);
    const Eigen::Vector3d centroid = (vertices_[a] + vertices_[b] + vertices_[c]) / 3.0;
    if (n.dot(centroid - inside) < 0.0) std::swap(b, c);
    faces_.push_back({a, b, c});
    parts_.push_back(part);
  }

  void add_quad(int a, int b, int c, int d, const Eigen::Vector3d& inside, Part part) {
    add_face(a, b, c, inside, part);
    add_face(a, c, d, inside, part);
  }

  void set_weights(int v, std::array<double, kNumJoints> weights) {
    weights_[static_cast<std::size_t>(v)] = weights;
  }

  void finish(RiggedHandTemplate& t) const {
    const auto nv = static_cast<Eigen::Index>(vertices_.size());
    t.rest_vertices.resize(nv, 3);
    t.skinning_weights.setZero(nv, kNumJoints);
    for (Eigen::Index v = 0; v < nv; ++v) {
      t.rest_vertices.row(v) = vertices_[static_cast<std::size_t>(v)].transpose();
      for (int j = 0; j < kNumJoints; ++j) t.skinning_weights(v, j) = weights_[static_cast<std::size_t>(v)][j];
    }
    t.faces.resize(static_cast<Eigen::Index>(faces_.size()), 3);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      for (int k = 0; k < 3; ++k) t.faces(static_cast<Eigen::Index>(f), k) = faces_[f][k];
    }
    t.part_labels = parts_;
  }

 private:
  std::vector<Eigen::Vector3d> vertices_;
  std::vector<std::array<double, kNumJoints>> weights_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<Part> parts_;
};

std::array<double, kNumJoints> single(int j) {
  std::array<double, kNumJoints> w{};
  w[static_cast<std::size_t>(j)] = 1.0;
  return w;
}

std::array<double, kNumJoints> blend(int a, int b) {
  std::array<double, kNumJoints> w{};
  w[static_cast<std::size_t>(a)] = 0.5;
  w[static_cast<std::size_t>(b)] += 0.5;
  return w;
}

}  // namespace

RiggedHandTemplate make_synthetic_hand() {
  RiggedHandTemplate t;
  MeshBuilder mb;

  // Palm: a bevelled slab whose dorsal faces all lean towards -Z and palmar
  // faces towards +Z.
  constexpr double kHalfWidth = 0.042;
  constexpr double kLength = 0.090;
  constexpr double kHalfThickness = 0.012;
  constexpr double kInset = 0.008;
  const Eigen::Vector3d palm_center(0.0, kLength / 2.0, 0.0);
  std::array<int, 4> rim{};
  std::array<int, 4> top{};
  std::array<int, 4> bottom{};
  const std::array<Eigen::Vector2d, 4> rim_xy = {Eigen::Vector2d(-kHalfWidth, 0.0), Eigen::Vector2d(kHalfWidth, 0.0),
                                                 Eigen::Vector2d(kHalfWidth, kLength), Eigen::Vector2d(-kHalfWidth, kLength)};
  const std::array<Eigen::Vector2d, 4> cap_xy = {
      Eigen::Vector2d(-kHalfWidth + kInset, kInset), Eigen::Vector2d(kHalfWidth - kInset, kInset),
      Eigen::Vector2d(kHalfWidth - kInset, kLength - kInset), Eigen::Vector2d(-kHalfWidth + kInset, kLength - kInset)};
  for (int i = 0; i < 4; ++i) {
    rim[i] = mb.add_vertex({rim_xy[i].x(), rim_xy[i].y(), 0.0}, single(0));
    top[i] = mb.add_vertex({cap_xy[i].x(), cap_xy[i].y(), -kHalfThickness}, single(0));
    bottom[i] = mb.add_vertex({cap_xy[i].x(), cap_xy[i].y(), kHalfThickness}, single(0));
  }
  mb.add_quad(top[0], top[1], top[2], top[3], palm_center, Part::Dorsum);
  mb.add_quad(bottom[0], bottom[1], bottom[2], bottom[3], palm_center, Part::Palm);
  for (int i = 0; i < 4; ++i) {
    const int n = (i + 1) % 4;
    mb.add_quad(rim[i], rim[n], top[n], top[i], palm_center, Part::Dorsum);
    mb.add_quad(rim[i], rim[n], bottom[n], bottom[i], palm_center, Part::Palm);
  }

  const Eigen::Matrix3d identity = Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d thumb_frame =
      Eigen::AngleAxisd(-std::numbers::pi / 4.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();

  const std::array<FingerSpec, 5> fingers = {{
      {Part::Index, 1, {0.027, kLength, 0.0}, {0.040, 0.025, 0.021}, 0.0085, identity},
      {Part::Middle, 4, {0.009, kLength, 0.0}, {0.044, 0.028, 0.022}, 0.0090, identity},
      {Part::Ring, 7, {-0.009, 0.088, 0.0}, {0.041, 0.027, 0.021}, 0.0085, identity},
      {Part::Pinky, 10, {-0.027, 0.084, 0.0}, {0.032, 0.020, 0.018}, 0.0075, identity},
      {Part::Thumb, 13, {0.030, 0.020, 0.004}, {0.040, 0.032, 0.028}, 0.0100, thumb_frame},
  }};

  t.parents[0] = -1;
  t.joint_names[0] = "wrist";
  t.joint_frames.fill(identity);

  std::array<std::array<int, 4>, kNumJoints> base_rings{};
  std::array<int, 5> tip_vertex{};

  for (std::size_t fi = 0; fi < fingers.size(); ++fi) {
    const FingerSpec& f = fingers[fi];
    const Eigen::Vector3d side = f.frame.col(0);
    const Eigen::Vector3d dir = f.frame.col(1);
    const Eigen::Vector3d normal = f.frame.col(2);
    Eigen::Vector3d start = f.base;
    std::array<int, 4> ring{};
    for (int s = 0; s < 3; ++s) {
      const int joint = f.first_joint + s;
      const int parent = s == 0 ? 0 : joint - 1;
      t.parents[static_cast<std::size_t>(joint)] = parent;
      t.joint_frames[static_cast<std::size_t>(joint)] = f.frame;
      t.joint_names[static_cast<std::size_t>(joint)] = std::string(part_name(f.part)) + std::to_string(s + 1);

      const double taper = 1.0 - 0.1 * s;
      const double r0 = f.radius * taper;
      const double r1 = f.radius * (taper - 0.1);
      const Eigen::Vector3d end = start + f.lengths[static_cast<std::size_t>(s)] * dir;
      const std::array<Eigen::Vector3d, 4> spokes = {side, normal, -side, -normal};
      const Eigen::Vector3d inside = 0.5 * (start + end);
      std::array<int, 4> ring1{};
      if (s == 0) {
        for (int i = 0; i < 4; ++i) ring[i] = mb.add_vertex(start + r0 * spokes[i], blend(parent, joint));
        mb.add_quad(ring[0], ring[1], ring[2], ring[3], inside, f.part);
      } else {
        // The previous segment's distal ring doubles as this joint's ring.
        for (int v : ring) mb.set_weights(v, blend(parent, joint));
      }
      for (int i = 0; i < 4; ++i) ring1[i] = mb.add_vertex(end + r1 * spokes[i], single(joint));
      base_rings[static_cast<std::size_t>(joint)] = ring;
      for (int i = 0; i < 4; ++i) {
        const int n = (i + 1) % 4;
        mb.add_quad(ring[i], ring[n], ring1[n], ring1[i], inside, f.part);
      }
      if (s == 2) {
        const Eigen::Vector3d apex_pos = end + 0.8 * r1 * dir - 0.4 * r1 * normal;
        const int apex = mb.add_vertex(apex_pos, single(joint));
        for (int i = 0; i < 4; ++i) mb.add_face(ring1[i], ring1[(i + 1) % 4], apex, inside, f.part);
        tip_vertex[fi] = apex;
      }
      ring = ring1;
      start = end;
    }
  }

  mb.finish(t);

  const int nv = t.num_vertices();
  t.joint_regressor.setZero(kNumJoints, nv);
  // Wrist: midpoint of the proximal palm rim.
  t.joint_regressor(0, rim[0]) = 0.5;
  t.joint_regressor(0, rim[1]) = 0.5;
  for (int j = 1; j < kNumJoints; ++j) {
    for (int v : base_rings[static_cast<std::size_t>(j)]) t.joint_regressor(j, v) = 0.25;
  }
  t.rest_joints = t.joint_regressor * t.rest_vertices;

  // Shape basis.
  Points3d scale = t.rest_vertices * 0.05;
  Points3d length = Points3d::Zero(nv, 3);
  Points3d width = Points3d::Zero(nv, 3);
  Points3d thickness = Points3d::Zero(nv, 3);
  for (int v = 0; v < nv; ++v) {
    width(v, 0) = 0.05 * t.rest_vertices(v, 0);
    thickness(v, 2) = 0.08 * t.rest_vertices(v, 2);
  }
  for (std::size_t fi = 0; fi < fingers.size(); ++fi) {
    const int mcp = fingers[fi].first_joint;
    for (int v = 0; v < nv; ++v) {
      int owner = -1;
      for (int s = 0; s < 3; ++s) {
        if (t.skinning_weights(v, mcp + s) > 0.0) owner = mcp;
      }
      if (owner >= 0) {
        length.row(v) = 0.05 * (t.rest_vertices.row(v) - t.rest_joints.row(mcp));
      }
    }
  }
  t.shape_basis = {scale, length, width, thickness};

  using Kind = KeypointSource::Kind;
  t.keypoint_map[0] = {Kind::Joint, 0};
  const std::array<Part, 5> layout = {Part::Thumb, Part::Index, Part::Middle, Part::Ring, Part::Pinky};
  for (Part p : layout) {
    std::size_t fi = 0;
    while (fingers[fi].part != p) ++fi;
    const int base = keypoint::base_of(p);
    for (int s = 0; s < 3; ++s) {
      t.keypoint_map[static_cast<std::size_t>(base + s)] = {Kind::Joint, fingers[fi].first_joint + s};
    }
    t.keypoint_map[static_cast<std::size_t>(base + 3)] = {Kind::Vertex, tip_vertex[fi]};
  }

  validate(t);
  return t;
}

}  // namespace dorsal
