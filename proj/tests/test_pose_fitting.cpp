#include "dorsal/pose_fitting.hpp"
#include "dorsal/synthetic_hand.hpp"
#include "support.hpp"

#include <doctest.h>

#include <functional>

using namespace dorsal;

namespace {

const RiggedHandTemplate& hand() {
  static const RiggedHandTemplate t = make_synthetic_hand();
  return t;
}

KeypointTargets targets_from(const HandState& s) {
  KeypointTargets t;
  t.points = pose_mesh(hand(), s).keypoints21;
  return t;
}

std::vector<int> marker_ids() {
  std::vector<int> ids;
  for (int v = 0; v < hand().num_vertices(); v += 3) ids.push_back(v);
  return ids;
}

MarkerTargets markers_from(const HandState& s) {
  MarkerTargets m;
  m.vertex_ids = marker_ids();
  const HandMesh mesh = pose_mesh(hand(), s);
  m.points.resize(static_cast<Eigen::Index>(m.vertex_ids.size()), 3);
  for (std::size_t i = 0; i < m.vertex_ids.size(); ++i) {
    m.points.row(static_cast<Eigen::Index>(i)) = mesh.vertices.row(m.vertex_ids[i]);
  }
  return m;
}

double rms(const Points3d& a, const Points3d& b) {
  return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

// Applies a perturbation to parameter i of the packed vector
// [pose (45) | global_orient (3) | translation (3) | shape].
HandState nudge(const HandState& s, int i, double h) {
  HandState out = s;
  if (i < 45) {
    out.pose(i / 3, i % 3) += h;
  } else if (i < 48) {
    out.global_orient(i - 45) += h;
  } else if (i < 51) {
    out.translation(i - 48) += h;
  } else {
    out.shape(i - 51) += h;
  }
  return out;
}

using ResidualAt = std::function<Eigen::VectorXd(const HandState&)>;

Eigen::MatrixXd central_difference(const ResidualAt& res, const HandState& s, int params, double h) {
  const Eigen::VectorXd r0 = res(s);
  Eigen::MatrixXd j(r0.size(), params);
  for (int i = 0; i < params; ++i) j.col(i) = (res(nudge(s, i, h)) - res(nudge(s, i, -h))) / (2.0 * h);
  return j;
}

}  // namespace

TEST_SUITE("pose_fitting") {

TEST_CASE("keypoint objective on exact targets is zero") {
  const HandState zero = HandState::neutral(hand().shape_rank());
  CHECK(objective_keypoints(hand(), zero, targets_from(zero), {}) == 0.0);
}

TEST_CASE("keypoint objective with one target moved 1 cm") {
  std::mt19937_64 rng(41);
  const HandState zero = HandState::neutral(hand().shape_rank());
  KeypointTargets t = targets_from(zero);
  t.points(7, 1) += 0.01;
  CHECK(objective_keypoints(hand(), zero, t, {}) == doctest::Approx(1e-4).epsilon(1e-9));

  // With a posed state the regularizers add lambda |theta|^2 + lambda |beta|^2.
  HandState s = test::random_state(hand(), rng, 20.0);
  KeypointTargets ts = targets_from(s);
  ts.points(3, 0) -= 0.01;
  FitConfig cfg;
  cfg.reg_pose_weight = 0.5;
  cfg.reg_shape_weight = 2.0;
  const double expected = 1e-4 + 0.5 * s.pose.squaredNorm() + 2.0 * s.shape.squaredNorm();
  CHECK(objective_keypoints(hand(), s, ts, cfg) == doctest::Approx(expected).epsilon(1e-12));

  // Unit weights give the literal unweighted sum.
  cfg.reg_pose_weight = cfg.reg_shape_weight = 1.0;
  CHECK(objective_keypoints(hand(), s, ts, cfg) ==
        doctest::Approx(1e-4 + s.pose.squaredNorm() + s.shape.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("confidence weights scale and drop keypoints") {
  const HandState zero = HandState::neutral(hand().shape_rank());
  KeypointTargets t = targets_from(zero);
  t.points(4, 2) += 0.01;
  t.confidence(4) = 0.25;
  CHECK(objective_keypoints(hand(), zero, t, {}) == doctest::Approx(0.25e-4).epsilon(1e-9));
  t.confidence(4) = 0.0;
  t.points(4, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK(objective_keypoints(hand(), zero, t, {}) == 0.0);
  t.confidence(4) = 1.5;
  CHECK_THROWS_AS(fit(hand(), t, zero, {}), InvariantError);
}

TEST_CASE("marker objective") {
  std::mt19937_64 rng(42);
  const HandState zero = HandState::neutral(hand().shape_rank());
  MarkerTargets m = markers_from(zero);
  CHECK(objective_markers(hand(), zero, m, {}) == 0.0);
  m.points(2, 0) += 0.02;
  CHECK(objective_markers(hand(), zero, m, {}) == doctest::Approx(4e-4).epsilon(1e-9));

  HandState s = test::random_state(hand(), rng, 20.0);
  MarkerTargets ms = markers_from(s);
  ms.points(0, 2) += 0.02;
  FitConfig cfg;
  cfg.reg_pose_weight = 0.3;
  cfg.reg_shape_weight = 1e6;  // no shape term, so this must not matter
  CHECK(objective_markers(hand(), s, ms, cfg) == doctest::Approx(4e-4 + 0.3 * s.pose.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("marker targets are validated") {
  const HandState zero = HandState::neutral(hand().shape_rank());
  MarkerTargets m = markers_from(zero);
  m.vertex_ids[1] = hand().num_vertices();
  CHECK_THROWS_AS(objective_markers(hand(), zero, m, {}), DimensionError);
  m.vertex_ids[1] = -1;
  CHECK_THROWS_AS(fit(hand(), m, zero, {}), DimensionError);

  MarkerTargets few = markers_from(zero);
  few.vertex_ids.resize(5);
  few.points.conservativeResize(5, 3);
  CHECK_THROWS_AS(fit(hand(), few, zero, {}), InvariantError);
}

TEST_CASE("fit configuration is validated") {
  FitConfig cfg;
  cfg.reg_pose_weight = -1.0;
  CHECK_THROWS_AS(validate(cfg), InvariantError);
  cfg = {};
  cfg.step_tolerance = 0.0;
  CHECK_THROWS_AS(validate(cfg), InvariantError);
  cfg = {};
  cfg.damping_init = 0.0;
  CHECK_THROWS_AS(validate(cfg), InvariantError);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(validate(cfg), InvariantError);
}

TEST_CASE("analytic Jacobians match central differences") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const HandState s = test::random_state(hand(), rng, 60.0);
    KeypointTargets kt = targets_from(test::random_state(hand(), rng, 30.0));
    kt.confidence(5) = 0.3;
    FitConfig cfg;
    cfg.reg_pose_weight = 0.01;
    cfg.reg_shape_weight = 0.02;
    const Eigen::MatrixXd ja = keypoint_jacobian(hand(), s, kt, cfg);
    const int np = kPoseParams + hand().shape_rank();
    REQUIRE(ja.cols() == np);
    const Eigen::MatrixXd jn = central_difference(
        [&](const HandState& x) { return keypoint_residuals(hand(), x, kt, cfg); }, s, np, 1e-6);
    CHECK((ja - jn).norm() / ja.norm() < 1e-5);

    const MarkerTargets mt = markers_from(test::random_state(hand(), rng, 30.0));
    const Eigen::MatrixXd ma = marker_jacobian(hand(), s, mt, cfg);
    REQUIRE(ma.cols() == kPoseParams);
    const Eigen::MatrixXd mn = central_difference(
        [&](const HandState& x) { return marker_residuals(hand(), x, mt, cfg); }, s, kPoseParams, 1e-6);
    CHECK((ma - mn).norm() / ma.norm() < 1e-5);
  }
}

TEST_CASE("residual vectors reproduce the objectives") {
  std::mt19937_64 rng(44);
  const HandState s = test::random_state(hand(), rng, 40.0);
  const KeypointTargets kt = targets_from(test::random_state(hand(), rng, 40.0));
  FitConfig cfg;
  cfg.reg_pose_weight = 0.1;
  cfg.reg_shape_weight = 0.2;
  CHECK(keypoint_residuals(hand(), s, kt, cfg).squaredNorm() ==
        doctest::Approx(objective_keypoints(hand(), s, kt, cfg)).epsilon(1e-12));
  const MarkerTargets mt = markers_from(test::random_state(hand(), rng, 40.0));
  CHECK(marker_residuals(hand(), s, mt, cfg).squaredNorm() ==
        doctest::Approx(objective_markers(hand(), s, mt, cfg)).epsilon(1e-12));
}

TEST_CASE("starting at the generating state is a fixed point") {
  std::mt19937_64 rng(45);
  const HandState s = test::random_state(hand(), rng, 45.0);
  const KeypointTargets t = targets_from(s);
  FitConfig plain;
  plain.reg_pose_weight = plain.reg_shape_weight = 0.0;
  const FitResult r = fit(hand(), t, s, plain);
  CHECK(r.converged);
  CHECK(r.iterations <= 1);
  CHECK(r.final_objective == 0.0);

  // A pose prior can still lower |theta| by moving twist between a bone and
  // its child, which leaves every keypoint where it was; the prior then
  // trades a few micrometres of fit for a smaller pose.
  const FitConfig cfg;
  const FitResult g = fit(hand(), t, s, cfg);
  const double reg = cfg.reg_pose_weight * s.pose.squaredNorm() + cfg.reg_shape_weight * s.shape.squaredNorm();
  CHECK(g.final_objective <= reg);
  CHECK(rms(pose_mesh(hand(), g.state).keypoints21, t.points) < 2e-5);
}

TEST_CASE("noiseless keypoints are recovered from a neutral start") {
  std::mt19937_64 rng(46);
  FitConfig cfg;
  cfg.max_iterations = 1000;
  for (int trial = 0; trial < 5; ++trial) {
    const HandState s = test::random_state(hand(), rng, 30.0);
    const KeypointTargets t = targets_from(s);
    const FitResult r = fit(hand(), t, HandState::neutral(hand().shape_rank()), cfg);
    CHECK(rms(pose_mesh(hand(), r.state).keypoints21, t.points) < 1e-3);
  }
}

TEST_CASE("1 mm keypoint noise leaves at most 2 mm RMS") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> noise(0.0, 0.001);
  FitConfig cfg;
  cfg.max_iterations = 1000;
  for (int trial = 0; trial < 5; ++trial) {
    const HandState s = test::random_state(hand(), rng, 30.0);
    KeypointTargets t = targets_from(s);
    for (Eigen::Index i = 0; i < t.points.size(); ++i) t.points.data()[i] += noise(rng);
    const FitResult r = fit(hand(), t, HandState::neutral(hand().shape_rank()), cfg);
    CHECK(rms(pose_mesh(hand(), r.state).keypoints21, t.points) <= 2e-3);
  }
}

TEST_CASE("accepted steps never increase the objective") {
  std::mt19937_64 rng(48);
  FitConfig cfg;
  cfg.record_trace = true;
  cfg.reg_pose_weight = 1e-4;
  const HandState s = test::random_state(hand(), rng, 50.0);
  const FitResult r = fit(hand(), targets_from(s), HandState::neutral(hand().shape_rank()), cfg);
  REQUIRE_FALSE(r.trace.empty());
  double last = objective_keypoints(hand(), HandState::neutral(hand().shape_rank()), targets_from(s), cfg);
  int accepted = 0;
  for (const auto& e : r.trace) {
    if (!e.accepted) continue;
    ++accepted;
    CHECK(e.objective <= last);
    last = e.objective;
  }
  CHECK(accepted > 0);
  CHECK(r.final_objective == last);
}

TEST_CASE("an exhausted iteration budget returns the best state so far") {
  std::mt19937_64 rng(49);
  FitConfig cfg;
  cfg.max_iterations = 2;
  const HandState s = test::random_state(hand(), rng, 50.0);
  const HandState zero = HandState::neutral(hand().shape_rank());
  const KeypointTargets t = targets_from(s);
  const FitResult r = fit(hand(), t, zero, cfg);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
  CHECK(r.final_objective < objective_keypoints(hand(), zero, t, cfg));
  CHECK(r.final_objective == doctest::Approx(objective_keypoints(hand(), r.state, t, cfg)).epsilon(1e-12));
}

TEST_CASE("a larger pose weight shrinks the fitted pose") {
  std::mt19937_64 rng(50);
  const HandState s = test::random_state(hand(), rng, 40.0);
  const KeypointTargets t = targets_from(s);
  double previous = std::numeric_limits<double>::infinity();
  for (double w : {1e-8, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1.0}) {
    FitConfig cfg;
    cfg.reg_pose_weight = w;
    cfg.max_iterations = 1000;
    const FitResult r = fit(hand(), t, s, cfg);
    const double norm = r.state.pose.norm();
    CHECK(norm <= previous + 1e-9);
    previous = norm;
  }
  CHECK(previous < 0.05 * s.pose.norm());
}

TEST_CASE("marker fit recovers the posed surface with shape held fixed") {
  std::mt19937_64 rng(51);
  FitConfig cfg;
  cfg.max_iterations = 1000;
  for (int trial = 0; trial < 3; ++trial) {
    const HandState s = test::random_state(hand(), rng, 30.0);
    const MarkerTargets m = markers_from(s);
    HandState init = HandState::neutral(hand().shape_rank());
    init.shape = s.shape;
    const FitResult r = fit(hand(), m, init, cfg);
    CHECK(r.state.shape == s.shape);
    CHECK(std::sqrt(objective_markers(hand(), r.state, m, FitConfig{0.0, 0.0}) /
                    static_cast<double>(m.vertex_ids.size())) < 1e-4);
  }
}

TEST_CASE("finite-difference Jacobian mode reaches the same answer") {
  std::mt19937_64 rng(52);
  const HandState s = test::random_state(hand(), rng, 20.0);
  const KeypointTargets t = targets_from(s);
  FitConfig a;
  a.max_iterations = 500;
  FitConfig b = a;
  b.jacobian = JacobianMode::CentralDifference;
  const HandState zero = HandState::neutral(hand().shape_rank());
  const FitResult ra = fit(hand(), t, zero, a);
  const FitResult rb = fit(hand(), t, zero, b);
  CHECK(rms(pose_mesh(hand(), ra.state).keypoints21, pose_mesh(hand(), rb.state).keypoints21) < 1e-5);
}

TEST_CASE("non-finite initial states are rejected") {
  HandState bad = HandState::neutral(hand().shape_rank());
  bad.translation(0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit(hand(), targets_from(HandState::neutral(hand().shape_rank())), bad, {}), InvariantError);
}

}  // TEST_SUITE
