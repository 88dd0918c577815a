#pragma once

#include "dorsal/common.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string_view>

namespace dorsal {

/// Pinhole camera. Camera space has +z pointing into the scene.
struct CameraRig {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int width = 1;
  int height = 1;

  Eigen::Matrix3d intrinsics() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
};

/// Points closer than this to the camera plane project as invalid.
inline constexpr double kNearPlane = 1e-6;

void validate(const CameraRig& rig);

/// p -> R p + t for each row.
template <typename Derived>
Points3<typename Derived::Scalar> world_to_camera(const CameraRig& rig, const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, 3, 3> r = rig.rotation.cast<Scalar>();
  const Eigen::Matrix<Scalar, 1, 3> t = rig.translation.cast<Scalar>().transpose();
  Points3<Scalar> out = points * r.transpose();
  out.rowwise() += t;
  return out;
}

template <typename Scalar>
struct Projection {
  Points2<Scalar> pixels;
  Eigen::Array<bool, Eigen::Dynamic, 1> valid;
};

/// u = fx x / z + cx, v = fy y / z + cy. Points with z <= kNearPlane are
/// flagged invalid and their pixel is left at zero.
template <typename Derived>
Projection<typename Derived::Scalar> project(const CameraRig& rig, const Eigen::MatrixBase<Derived>& points_cam) {
  using Scalar = typename Derived::Scalar;
  Projection<Scalar> out;
  const Eigen::Index n = points_cam.rows();
  out.pixels.setZero(n, 2);
  out.valid.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar z = points_cam(i, 2);
    if (!(z > Scalar(kNearPlane))) {
      out.valid(i) = false;
      continue;
    }
    out.valid(i) = true;
    out.pixels(i, 0) = Scalar(rig.fx) * points_cam(i, 0) / z + Scalar(rig.cx);
    out.pixels(i, 1) = Scalar(rig.fy) * points_cam(i, 1) / z + Scalar(rig.cy);
  }
  return out;
}

inline constexpr std::string_view kCalibrationSchema = "dorsal.calibration/1";

/// Reads a calibration document. Distortion coefficients, if present, are
/// accepted and ignored with a warning.
CameraRig load_calibration(const std::filesystem::path& path);
CameraRig parse_calibration(std::string_view text);
std::string serialize_calibration(const CameraRig& rig);

}  // namespace dorsal
