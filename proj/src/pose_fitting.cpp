#include "dorsal/pose_fitting.hpp"

#include "dorsal/rotation.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <string>

namespace dorsal {

namespace {

constexpr int kOrientCol = 3 * kNumArticulated;
constexpr int kTransCol = kOrientCol + 3;
constexpr int kShapeCol = kTransCol + 3;

int rotation_col(int joint) { return joint == 0 ? kOrientCol : 3 * (joint - 1); }

Eigen::VectorXd pack(const HandState& s, bool with_shape) {
  Eigen::VectorXd x(kPoseParams + (with_shape ? s.shape.size() : 0));
  for (int j = 0; j < kNumArticulated; ++j) x.segment<3>(3 * j) = s.pose.row(j).transpose();
  x.segment<3>(kOrientCol) = s.global_orient;
  x.segment<3>(kTransCol) = s.translation;
  if (with_shape) x.tail(s.shape.size()) = s.shape;
  return x;
}

HandState unpack(const Eigen::VectorXd& x, const HandState& base, bool with_shape) {
  HandState s = base;
  for (int j = 0; j < kNumArticulated; ++j) s.pose.row(j) = x.segment<3>(3 * j).transpose();
  s.global_orient = x.segment<3>(kOrientCol);
  s.translation = x.segment<3>(kTransCol);
  if (with_shape) s.shape = x.tail(x.size() - kPoseParams);
  return s;
}

HandState with_full_shape(const RiggedHandTemplate& tmpl, HandState s) {
  if (s.shape.size() < tmpl.shape_rank()) {
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(tmpl.shape_rank());
    padded.head(s.shape.size()) = s.shape;
    s.shape = padded;
  }
  return s;
}

double pose_norm2(const HandState& s) { return s.pose.squaredNorm(); }

bool usable(double weight, const Eigen::Vector3d& target) { return weight > 0.0 && target.allFinite(); }

void check_targets(const KeypointTargets& t) {
  if (t.points.rows() != kNumKeypoints) throw DimensionError("keypoint targets must have 21 rows");
  if (t.confidence.size() != kNumKeypoints) throw DimensionError("keypoint confidence must have 21 entries");
  if ((t.confidence.array() < 0.0).any() || (t.confidence.array() > 1.0).any()) {
    throw InvariantError("keypoint confidence must lie in [0, 1]");
  }
}

void check_targets(const RiggedHandTemplate& tmpl, const MarkerTargets& t) {
  const auto k = static_cast<Eigen::Index>(t.vertex_ids.size());
  if (t.points.rows() != k) throw DimensionError("marker points and vertex ids differ in count");
  if (k < 6) throw InvariantError("at least 6 markers are needed to determine a rigid pose");
  if (t.confidence.size() != 0 && t.confidence.size() != k) throw DimensionError("marker confidence size mismatch");
  for (int id : t.vertex_ids) {
    if (id < 0 || id >= tmpl.num_vertices()) throw DimensionError("vertex_id out of range: " + std::to_string(id));
  }
}

double marker_weight(const MarkerTargets& t, Eigen::Index m) {
  return t.confidence.size() == 0 ? 1.0 : t.confidence(m);
}

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

Eigen::MatrixXd central_difference(const ResidualFn& res, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd r0 = res(x);
  Eigen::MatrixXd jac(r0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const Eigen::VectorXd rp = res(xp);
    xp(i) = x(i) - h;
    const Eigen::VectorXd rm = res(xp);
    xp(i) = x(i);
    jac.col(i) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

struct LmOutcome {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<FitLogEntry> trace;
};

LmOutcome levenberg_marquardt(const ResidualFn& res, const JacobianFn& jac, Eigen::VectorXd x, const FitConfig& cfg) {
  LmOutcome out;
  Eigen::VectorXd r = res(x);
  double f = r.squaredNorm();
  if (!std::isfinite(f)) throw Error("objective is not finite at the initial state");
  double mu = cfg.damping_init;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    out.iterations = it;
    const Eigen::MatrixXd j = jac(x);
    const Eigen::VectorXd g = j.transpose() * r;
    const Eigen::MatrixXd h = j.transpose() * j;
    if (g.norm() == 0.0) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd a = h;
      a.diagonal().array() += mu;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = res(x_new);
      const double f_new = r_new.squaredNorm();
      const bool better = std::isfinite(f_new) && f_new < f;
      if (cfg.record_trace) out.trace.push_back({it, better ? f_new : f, mu, better});
      if (better) {
        const double decrease = f - f_new;
        x = x_new;
        r = r_new;
        f = f_new;
        mu = std::max(mu / 10.0, 1e-15);
        accepted = true;
        if (step.norm() < cfg.step_tolerance || decrease < cfg.residual_tolerance) out.converged = true;
      } else {
        if (step.norm() < cfg.step_tolerance) {
          // The damped step has shrunk to nothing without improving: x is
          // stationary to working precision.
          stalled = true;
          break;
        }
        mu *= 10.0;
        if (mu > 1e20) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.x = std::move(x);
  out.objective = f;
  return out;
}


}  // namespace

void validate(const FitConfig& cfg) {
  if (cfg.reg_pose_weight < 0.0 || cfg.reg_shape_weight < 0.0) throw InvariantError("regularizer weights must be >= 0");
  if (!(cfg.step_tolerance > 0.0) || !(cfg.residual_tolerance > 0.0)) throw InvariantError("tolerances must be > 0");
  if (cfg.max_iterations < 1) throw InvariantError("max_iterations must be >= 1");
  if (!(cfg.damping_init > 0.0)) throw InvariantError("damping_init must be > 0");
  if (!(cfg.fd_step > 0.0)) throw InvariantError("fd_step must be > 0");
}

VertexJacobian posed_vertex_jacobian(const RiggedHandTemplate& tmpl, const HandState& state) {
  const Skeleton sk = forward_kinematics(tmpl, state);
  const int nv = tmpl.num_vertices();
  const int rank = static_cast<int>(state.shape.size());
  const int np = kPoseParams + rank;

  // World-frame rotation-rate axes: d(posed point)/d(theta_kc) = a_kc x (q - P_k).
  std::array<Eigen::Matrix3d, kNumJoints> axes;
  for (int k = 0; k < kNumJoints; ++k) {
    const int p = tmpl.parents[k];
    const Eigen::Matrix3d parent_rot = p < 0 ? Eigen::Matrix3d::Identity() : sk.rotations[p];
    const Eigen::Vector3d aa = k == 0 ? state.global_orient : Eigen::Vector3d(state.pose.row(k - 1).transpose());
    axes[k] = parent_rot * so3_left_jacobian(aa);
  }

  // ancestors[j] lists joints whose rotation moves joint j's frame.
  std::array<std::vector<int>, kNumJoints> ancestors;
  for (int j = 0; j < kNumJoints; ++j) {
    for (int cur = j; cur != -1; cur = tmpl.parents[cur]) ancestors[j].push_back(cur);
  }

  // Shape derivatives of the rest joints and of the posed joint centres.
  const auto order = tmpl.topological_order();
  std::vector<Points3d> d_rest(rank), d_posed(rank);
  for (int s = 0; s < rank; ++s) {
    d_rest[s] = tmpl.joint_regressor * tmpl.shape_basis[static_cast<std::size_t>(s)];
    d_posed[s].resize(kNumJoints, 3);
    for (int j : order) {
      const int p = tmpl.parents[j];
      if (p < 0) {
        d_posed[s].row(j) = d_rest[s].row(j);
      } else {
        d_posed[s].row(j) = d_posed[s].row(p) + (d_rest[s].row(j) - d_rest[s].row(p)) * sk.rotations[p].transpose();
      }
    }
  }

  VertexJacobian out;
  out.dx.setZero(nv, np);
  out.dy.setZero(nv, np);
  out.dz.setZero(nv, np);
  auto add = [&](int v, int col, const Eigen::Vector3d& d) {
    out.dx(v, col) += d.x();
    out.dy(v, col) += d.y();
    out.dz(v, col) += d.z();
  };

  for (int v = 0; v < nv; ++v) {
    const Eigen::Vector3d x = sk.shaped_vertices.row(v).transpose();
    for (int j = 0; j < kNumJoints; ++j) {
      const double w = tmpl.skinning_weights(v, j);
      if (w == 0.0) continue;
      const Eigen::Matrix3d& rj = sk.rotations[j];
      const Eigen::Vector3d q = rj * (x - sk.rest_joints.row(j).transpose()) + sk.positions.row(j).transpose();
      for (int k : ancestors[j]) {
        const Eigen::Vector3d lever = q - sk.positions.row(k).transpose();
        const int col = rotation_col(k);
        for (int c = 0; c < 3; ++c) add(v, col + c, w * axes[k].col(c).cross(lever));
      }
      for (int s = 0; s < rank; ++s) {
        const Eigen::Vector3d dx = tmpl.shape_basis[static_cast<std::size_t>(s)].row(v).transpose();
        const Eigen::Vector3d dj = d_rest[s].row(j).transpose();
        const Eigen::Vector3d dp = d_posed[s].row(j).transpose();
        add(v, kShapeCol + s, w * (rj * (dx - dj) + dp));
      }
    }
    out.dx(v, kTransCol) = 1.0;
    out.dy(v, kTransCol + 1) = 1.0;
    out.dz(v, kTransCol + 2) = 1.0;
  }
  return out;
}

Eigen::VectorXd keypoint_residuals(const RiggedHandTemplate& tmpl, const HandState& state,
                                   const KeypointTargets& targets, const FitConfig& cfg) {
  check_targets(targets);
  const HandMesh mesh = pose_mesh(tmpl, state);
  const auto rank = state.shape.size();
  Eigen::VectorXd r(3 * kNumKeypoints + 3 * kNumArticulated + rank);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Eigen::Vector3d target = targets.points.row(k).transpose();
    const double w = targets.confidence(k);
    r.segment<3>(3 * k) = usable(w, target)
                              ? Eigen::Vector3d(std::sqrt(w) * (mesh.keypoints21.row(k).transpose() - target))
                              : Eigen::Vector3d::Zero();
  }
  const double sp = std::sqrt(cfg.reg_pose_weight);
  for (int j = 0; j < kNumArticulated; ++j) r.segment<3>(3 * kNumKeypoints + 3 * j) = sp * state.pose.row(j).transpose();
  r.tail(rank) = std::sqrt(cfg.reg_shape_weight) * state.shape;
  return r;
}

Eigen::VectorXd marker_residuals(const RiggedHandTemplate& tmpl, const HandState& state,
                                 const MarkerTargets& targets, const FitConfig& cfg) {
  check_targets(tmpl, targets);
  const HandMesh mesh = pose_mesh(tmpl, state);
  const auto k = static_cast<Eigen::Index>(targets.vertex_ids.size());
  Eigen::VectorXd r(3 * k + 3 * kNumArticulated);
  for (Eigen::Index m = 0; m < k; ++m) {
    const Eigen::Vector3d target = targets.points.row(m).transpose();
    const double w = marker_weight(targets, m);
    const Eigen::Vector3d v = mesh.vertices.row(targets.vertex_ids[static_cast<std::size_t>(m)]).transpose();
    r.segment<3>(3 * m) = usable(w, target) ? Eigen::Vector3d(std::sqrt(w) * (v - target)) : Eigen::Vector3d::Zero();
  }
  const double sp = std::sqrt(cfg.reg_pose_weight);
  for (int j = 0; j < kNumArticulated; ++j) r.segment<3>(3 * k + 3 * j) = sp * state.pose.row(j).transpose();
  return r;
}

Eigen::MatrixXd keypoint_jacobian(const RiggedHandTemplate& tmpl, const HandState& state,
                                  const KeypointTargets& targets, const FitConfig& cfg) {
  check_targets(targets);
  const auto rank = state.shape.size();
  const auto np = kPoseParams + rank;
  if (cfg.jacobian == JacobianMode::CentralDifference) {
    const ResidualFn res = [&](const Eigen::VectorXd& x) {
      return keypoint_residuals(tmpl, unpack(x, state, true), targets, cfg);
    };
    return central_difference(res, pack(state, true), cfg.fd_step);
  }

  const VertexJacobian vj = posed_vertex_jacobian(tmpl, state);
  const std::array<Eigen::MatrixXd, 3> joint_d = {tmpl.joint_regressor * vj.dx, tmpl.joint_regressor * vj.dy,
                                                  tmpl.joint_regressor * vj.dz};
  const std::array<const Eigen::MatrixXd*, 3> vert_d = {&vj.dx, &vj.dy, &vj.dz};

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * kNumKeypoints + 3 * kNumArticulated + rank, np);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double w = targets.confidence(k);
    if (!usable(w, targets.points.row(k).transpose())) continue;
    const double sw = std::sqrt(w);
    const auto& src = tmpl.keypoint_map[static_cast<std::size_t>(k)];
    for (int c = 0; c < 3; ++c) {
      jac.row(3 * k + c) = sw * (src.kind == KeypointSource::Kind::Joint ? joint_d[c].row(src.index)
                                                                         : vert_d[c]->row(src.index));
    }
  }
  const double sp = std::sqrt(cfg.reg_pose_weight);
  for (int i = 0; i < 3 * kNumArticulated; ++i) jac(3 * kNumKeypoints + i, i) = sp;
  const double ss = std::sqrt(cfg.reg_shape_weight);
  for (Eigen::Index s = 0; s < rank; ++s) jac(3 * kNumKeypoints + 3 * kNumArticulated + s, kShapeCol + s) = ss;
  return jac;
}

Eigen::MatrixXd marker_jacobian(const RiggedHandTemplate& tmpl, const HandState& state,
                                const MarkerTargets& targets, const FitConfig& cfg) {
  check_targets(tmpl, targets);
  const auto k = static_cast<Eigen::Index>(targets.vertex_ids.size());
  if (cfg.jacobian == JacobianMode::CentralDifference) {
    const ResidualFn res = [&](const Eigen::VectorXd& x) {
      return marker_residuals(tmpl, unpack(x, state, false), targets, cfg);
    };
    return central_difference(res, pack(state, false), cfg.fd_step);
  }
  const VertexJacobian vj = posed_vertex_jacobian(tmpl, state);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * k + 3 * kNumArticulated, kPoseParams);
  for (Eigen::Index m = 0; m < k; ++m) {
    const double w = marker_weight(targets, m);
    if (!usable(w, targets.points.row(m).transpose())) continue;
    const double sw = std::sqrt(w);
    const int v = targets.vertex_ids[static_cast<std::size_t>(m)];
    jac.row(3 * m) = sw * vj.dx.row(v).head(kPoseParams);
    jac.row(3 * m + 1) = sw * vj.dy.row(v).head(kPoseParams);
    jac.row(3 * m + 2) = sw * vj.dz.row(v).head(kPoseParams);
  }
  const double sp = std::sqrt(cfg.reg_pose_weight);
  for (int i = 0; i < 3 * kNumArticulated; ++i) jac(3 * k + i, i) = sp;
  return jac;
}

double objective_keypoints(const RiggedHandTemplate& tmpl, const HandState& state, const KeypointTargets& targets,
                           const FitConfig& cfg) {
  check_targets(targets);
  const HandMesh mesh = pose_mesh(tmpl, state);
  double data = 0.0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Eigen::Vector3d target = targets.points.row(k).transpose();
    const double w = targets.confidence(k);
    if (usable(w, target)) data += w * (mesh.keypoints21.row(k).transpose() - target).squaredNorm();
  }
  return data + cfg.reg_pose_weight * pose_norm2(state) + cfg.reg_shape_weight * state.shape.squaredNorm();
}

double objective_markers(const RiggedHandTemplate& tmpl, const HandState& state, const MarkerTargets& targets,
                         const FitConfig& cfg) {
  check_targets(tmpl, targets);
  const HandMesh mesh = pose_mesh(tmpl, state);
  double data = 0.0;
  for (std::size_t m = 0; m < targets.vertex_ids.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    const Eigen::Vector3d target = targets.points.row(mi).transpose();
    const double w = marker_weight(targets, mi);
    if (usable(w, target)) data += w * (mesh.vertices.row(targets.vertex_ids[m]).transpose() - target).squaredNorm();
  }
  return data + cfg.reg_pose_weight * pose_norm2(state);
}

FitResult fit(const RiggedHandTemplate& tmpl, const KeypointTargets& targets, const HandState& init,
              const FitConfig& cfg) {
  validate(cfg);
  check_targets(targets);
  if (!init.is_finite()) throw InvariantError("initial state is not finite");
  const HandState base = with_full_shape(tmpl, init);
  const ResidualFn res = [&](const Eigen::VectorXd& x) {
    return keypoint_residuals(tmpl, unpack(x, base, true), targets, cfg);
  };
  const JacobianFn jac = [&](const Eigen::VectorXd& x) {
    return keypoint_jacobian(tmpl, unpack(x, base, true), targets, cfg);
  };
  LmOutcome lm = levenberg_marquardt(res, jac, pack(base, true), cfg);
  return {unpack(lm.x, base, true), lm.objective, lm.iterations, lm.converged, std::move(lm.trace)};
}

FitResult fit(const RiggedHandTemplate& tmpl, const MarkerTargets& targets, const HandState& init,
              const FitConfig& cfg) {
  validate(cfg);
  check_targets(tmpl, targets);
  if (!init.is_finite()) throw InvariantError("initial state is not finite");
  const ResidualFn res = [&](const Eigen::VectorXd& x) {
    return marker_residuals(tmpl, unpack(x, init, false), targets, cfg);
  };
  const JacobianFn jac = [&](const Eigen::VectorXd& x) {
    return marker_jacobian(tmpl, unpack(x, init, false), targets, cfg);
  };
  LmOutcome lm = levenberg_marquardt(res, jac, pack(init, false), cfg);
  return {unpack(lm.x, init, false), lm.objective, lm.iterations, lm.converged, std::move(lm.trace)};
}

}  // namespace dorsal
