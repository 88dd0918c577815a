#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dorsal {

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Mat3<Scalar> s;
  s << Scalar(0), -v(2), v(1),
       v(2), Scalar(0), -v(0),
       -v(1), v(0), Scalar(0);
  return s;
}

/// Rodrigues' formula. The vector's direction is the axis, its norm the
/// angle in radians.
template <typename Derived>
Mat3<typename Derived::Scalar> axis_angle_to_matrix(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar angle = v.norm();
  if (angle < Scalar(1e-12)) {
    return Mat3<Scalar>::Identity() + skew(v);
  }
  const Vec3<Scalar> axis = v / angle;
  return Eigen::AngleAxis<Scalar>(angle, axis).toRotationMatrix();
}

/// Inverse of axis_angle_to_matrix; the returned angle lies in [0, pi].
template <typename Derived>
Vec3<typename Derived::Scalar> matrix_to_axis_angle(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Eigen::AngleAxis<Scalar> aa{Mat3<Scalar>(r)};
  return aa.axis() * aa.angle();
}

/// Geodesic distance on SO(3), radians in [0, pi].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rotation_angle_between(const Eigen::MatrixBase<DerivedA>& a,
                                                 const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Quaternion<Scalar> q{Mat3<Scalar>(a.transpose() * b)};
  return Scalar(2) * std::atan2(q.vec().norm(), std::abs(q.w()));
}

/// Left Jacobian of SO(3). For R = exp([v]x), perturbing v by dv gives
/// exp([J dv]x) R to first order, so column c is the rotation-rate vector of
/// dR/dv_c.
template <typename Derived>
Mat3<typename Derived::Scalar> so3_left_jacobian(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta2 = v.squaredNorm();
  const Mat3<Scalar> k = skew(v);
  Scalar a;
  Scalar b;
  if (theta2 < Scalar(1e-10)) {
    a = Scalar(0.5) - theta2 / Scalar(24);
    b = Scalar(1) / Scalar(6) - theta2 / Scalar(120);
  } else {
    const Scalar theta = std::sqrt(theta2);
    a = (Scalar(1) - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3<Scalar>::Identity() + a * k + b * k * k;
}

/// Intrinsic X-Y-Z Euler angles: R = Rx(a) * Ry(b) * Rz(c).
template <typename Derived>
Vec3<typename Derived::Scalar> euler_xyz(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const Scalar sb = std::clamp(r(0, 2), Scalar(-1), Scalar(1));
  const Scalar b = std::asin(sb);
  Scalar a;
  Scalar c;
  if (std::abs(sb) < Scalar(1) - Scalar(1e-12)) {
    a = std::atan2(-r(1, 2), r(2, 2));
    c = std::atan2(-r(0, 1), r(0, 0));
  } else {
    // Gimbal lock: only a +/- c is determined; put it all on X.
    a = std::atan2(r(2, 1), r(1, 1));
    c = Scalar(0);
  }
  return {a, b, c};
}

template <typename Scalar>
Mat3<Scalar> euler_xyz_to_matrix(const Vec3<Scalar>& e) {
  return (Eigen::AngleAxis<Scalar>(e(0), Vec3<Scalar>::UnitX()) *
          Eigen::AngleAxis<Scalar>(e(1), Vec3<Scalar>::UnitY()) *
          Eigen::AngleAxis<Scalar>(e(2), Vec3<Scalar>::UnitZ()))
      .toRotationMatrix();
}

template <typename Scalar>
constexpr Scalar degrees(Scalar radians) {
  return radians * Scalar(180) / std::numbers::pi_v<Scalar>;
}

template <typename Scalar>
constexpr Scalar radians(Scalar degrees) {
  return degrees * std::numbers::pi_v<Scalar> / Scalar(180);
}

}  // namespace dorsal
