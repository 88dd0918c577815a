#pragma once

#include "dorsal/camera.hpp"
#include "dorsal/hand_model.hpp"
#include "dorsal/occlusion.hpp"
#include "dorsal/rotation.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dorsal::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  return Eigen::AngleAxisd(uniform(rng, 0.0, std::numbers::pi), random_unit(rng)).toRotationMatrix();
}

/// Each joint gets a rotation whose components in its own frame lie in
/// [-max_deg, max_deg].
inline HandState random_state(const RiggedHandTemplate& tmpl, std::mt19937_64& rng, double max_deg,
                              double shape_range = 1.0) {
  HandState s = HandState::neutral(tmpl.shape_rank());
  const double m = radians(max_deg);
  for (int j = 1; j < kNumJoints; ++j) {
    const Eigen::Vector3d local(uniform(rng, -m, m), uniform(rng, -m, m), uniform(rng, -m, m));
    s.pose.row(j - 1) = (tmpl.joint_frames[static_cast<std::size_t>(j)] * local).transpose();
  }
  for (Eigen::Index k = 0; k < s.shape.size(); ++k) s.shape(k) = uniform(rng, -shape_range, shape_range);
  s.global_orient = matrix_to_axis_angle(random_rotation(rng));
  s.translation = Eigen::Vector3d(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
  return s;
}

inline CameraRig simple_rig(double f = 600.0, int w = 640, int h = 480) {
  CameraRig rig;
  rig.fx = rig.fy = f;
  rig.cx = w / 2.0;
  rig.cy = h / 2.0;
  rig.width = w;
  rig.height = h;
  return rig;
}

/// Moller-Trumbore ray/triangle test; returns the ray parameter or -1.
inline double ray_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, const Eigen::Vector3d& a,
                           const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d e1 = b - a;
  const Eigen::Vector3d e2 = c - a;
  const Eigen::Vector3d p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return -1.0;
  const double inv = 1.0 / det;
  const Eigen::Vector3d s = origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Eigen::Vector3d q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(q) * inv;
}

struct RayCastVisibility {
  /// Visible fraction of each face's surface, 0 for back faces.
  std::vector<double> fraction;
  std::vector<double> visible_area;
};

/// Object-space oracle. Every face is cut into n^2 equal sub-triangles; a
/// sub-triangle centroid is visible when the segment from the camera centre
/// to it crosses no other triangle. Back faces count as hidden.
inline RayCastVisibility raycast_visibility(const Points3d& vcam, const FaceIndices& faces, int n = 8) {
  const auto nf = faces.rows();
  RayCastVisibility out;
  out.fraction.assign(static_cast<std::size_t>(nf), 0.0);
  out.visible_area.assign(static_cast<std::size_t>(nf), 0.0);
  auto vert = [&](Eigen::Index f, int k) { return Eigen::Vector3d(vcam.row(faces(f, k)).transpose()); };
  for (Eigen::Index f = 0; f < nf; ++f) {
    const Eigen::Vector3d a = vert(f, 0);
    const Eigen::Vector3d b = vert(f, 1);
    const Eigen::Vector3d c = vert(f, 2);
    const Eigen::Vector3d normal = (b - a).cross(c - a);
    const double area = 0.5 * normal.norm();
    if (area == 0.0) continue;
    const Eigen::Vector3d centroid = (a + b + c) / 3.0;
    if (normal.dot(centroid) >= 0.0) continue;
    int seen = 0;
    int total = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n - i; ++j) {
        // Upward and downward sub-triangles of the barycentric lattice.
        std::vector<Eigen::Vector2d> centres = {{(i + 1.0 / 3.0) / n, (j + 1.0 / 3.0) / n}};
        if (i + j < n - 1) centres.emplace_back((i + 2.0 / 3.0) / n, (j + 2.0 / 3.0) / n);
        for (const auto& uv : centres) {
          ++total;
          const Eigen::Vector3d p = a + uv.x() * (b - a) + uv.y() * (c - a);
          if (p.z() <= kNearPlane) continue;
          bool blocked = false;
          for (Eigen::Index g = 0; g < nf && !blocked; ++g) {
            if (g == f) continue;
            const double t = ray_triangle(Eigen::Vector3d::Zero(), p, vert(g, 0), vert(g, 1), vert(g, 2));
            blocked = t > 1e-9 && t < 1.0 - 1e-9;
          }
          if (!blocked) ++seen;
        }
      }
    }
    out.fraction[static_cast<std::size_t>(f)] = static_cast<double>(seen) / total;
    out.visible_area[static_cast<std::size_t>(f)] = area * out.fraction[static_cast<std::size_t>(f)];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dorsal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// File name to bytes for every regular file under `dir`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).generic_string()] = read_file(e.path());
  }
  return out;
}

/// CSV rows split on commas, with '#' comment lines dropped. Row 0 is the header.
inline std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace dorsal::test
