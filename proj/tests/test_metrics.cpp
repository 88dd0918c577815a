#include "dorsal/metrics.hpp"
#include "dorsal/synthetic_hand.hpp"
#include "support.hpp"

#include <Eigen/Eigenvalues>
#include <doctest.h>

using namespace dorsal;

namespace {

const RiggedHandTemplate& hand() {
  static const RiggedHandTemplate t = make_synthetic_hand();
  return t;
}

Points3d random_cloud(std::mt19937_64& rng, int n) {
  Points3d p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = test::uniform(rng, -0.1, 0.1);
  return p;
}

Points3d similarity(const Points3d& p, double s, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  return (s * p * r.transpose()).rowwise() + t.transpose();
}

// Horn's quaternion solution for the rotation, then the least-squares scale
// for that rotation. Returns the aligned copy of `from`.
Points3d horn_align(const Points3d& from, const Points3d& to) {
  const Eigen::RowVector3d mf = from.colwise().mean();
  const Eigen::RowVector3d mt = to.colwise().mean();
  const Points3d a = from.rowwise() - mf;
  const Points3d b = to.rowwise() - mt;
  const Eigen::Matrix3d s = a.transpose() * b;
  Eigen::Matrix4d n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  const Eigen::Matrix3d r = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  const Points3d ra = a * r.transpose();
  const double scale = (ra.array() * b.array()).sum() / a.squaredNorm();
  return (scale * ra).rowwise() + mt;
}

HandState with_joint(int joint_row, const Eigen::Vector3d& aa) {
  HandState s = HandState::neutral(hand().shape_rank());
  s.pose.row(joint_row) = aa.transpose();
  return s;
}

}  // namespace

TEST_SUITE("evaluation_metrics") {

TEST_CASE("identical poses have zero angular error") {
  std::mt19937_64 rng(81);
  const HandState s = test::random_state(hand(), rng, 60.0);
  const JointAngleErrors e = mpjae({s, s});
  CHECK(e.mean_deg == 0.0);
  for (double v : e.per_joint_deg) CHECK(v == 0.0);
  CHECK(mpjae({s, s}, AngularError::PerAxisEuler).mean_deg == 0.0);
}

TEST_CASE("a single joint off by 30 degrees") {
  std::mt19937_64 rng(82);
  for (int trial = 0; trial < 10; ++trial) {
    const HandState gt = test::random_state(hand(), rng, 40.0);
    HandState pred = gt;
    const int j = trial % kNumArticulated;
    const Eigen::Matrix3d base = axis_angle_to_matrix(Eigen::Vector3d(gt.pose.row(j).transpose()));
    const Eigen::Matrix3d delta = Eigen::AngleAxisd(radians(30.0), test::random_unit(rng)).toRotationMatrix();
    pred.pose.row(j) = matrix_to_axis_angle(Eigen::Matrix3d(base * delta)).transpose();
    const JointAngleErrors e = mpjae({pred, gt});
    CHECK(e.per_joint_deg[static_cast<std::size_t>(j)] == doctest::Approx(30.0).epsilon(1e-9));
    CHECK(e.mean_deg == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("antipodal axis-angle vectors are the same rotation") {
  const double pi = std::numbers::pi;
  const JointAngleErrors e = mpjae({with_joint(3, {pi, 0, 0}), with_joint(3, {-pi, 0, 0})});
  CHECK(e.per_joint_deg[3] < 1e-6);
}

TEST_CASE("angular error ignores a shared global rotation") {
  std::mt19937_64 rng(83);
  PosePair p{test::random_state(hand(), rng, 40.0), test::random_state(hand(), rng, 40.0), {}, {}};
  const JointAngleErrors before = mpjae(p);
  const Eigen::Vector3d g = matrix_to_axis_angle(test::random_rotation(rng));
  p.predicted.global_orient = g;
  p.ground_truth.global_orient = g;
  const JointAngleErrors after = mpjae(p);
  for (int j = 0; j < kNumArticulated; ++j) CHECK(after.per_joint_deg[j] == before.per_joint_deg[j]);
}

TEST_CASE("per-axis Euler error on a pure flexion difference") {
  const JointAngleErrors e =
      mpjae({with_joint(0, {radians(20.0), 0, 0}), with_joint(0, {radians(5.0), 0, 0})}, AngularError::PerAxisEuler);
  // (15 + 0 + 0) / 3
  CHECK(e.per_joint_deg[0] == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("PA-MPJPE is zero on similarity copies and invariant to similarity") {
  std::mt19937_64 rng(84);
  for (int trial = 0; trial < 20; ++trial) {
    const Points3d gt = random_cloud(rng, 21);
    const Eigen::Matrix3d r = test::random_rotation(rng);
    const double s = test::uniform(rng, 0.5, 2.0);
    const Eigen::Vector3d t(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, -1, 1));
    CHECK(pa_mpjpe_mm(similarity(gt, s, r, t), gt) < 1e-9);

    const Points3d pred = gt + 0.005 * random_cloud(rng, 21);
    const double base = pa_mpjpe_mm(pred, gt);
    CHECK(std::abs(pa_mpjpe_mm(similarity(pred, s, r, t), gt) - base) < 1e-9);
    // Alignment minimizes squared error, so it is the RMS that cannot grow.
    const Points3d aligned = horn_align(pred, gt);
    CHECK((aligned - gt).squaredNorm() <= (pred - gt).squaredNorm() + 1e-18);
  }
}

TEST_CASE("PA-MPJPE matches a quaternion Procrustes oracle") {
  std::mt19937_64 rng(85);
  const Points3d gt = random_cloud(rng, 21);
  Points3d pred = gt;
  pred(7, 0) += 0.003;  // one point 3 mm off
  const double oracle = 1000.0 * (horn_align(pred, gt) - gt).rowwise().norm().mean();
  CHECK(pa_mpjpe_mm(pred, gt) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(mpjpe_mm(pred, gt) == doctest::Approx(3.0 / 21.0).epsilon(1e-12));
  // Spreading one point's error over all 21 lowers the squared sum but raises
  // the mean distance, so the aligned value exceeds 3/21 mm here.
  CHECK(pa_mpjpe_mm(pred, gt) > mpjpe_mm(pred, gt));

  for (int trial = 0; trial < 20; ++trial) {
    const Points3d a = random_cloud(rng, 15);
    const Points3d b = similarity(a, 1.3, test::random_rotation(rng), {0.1, 0.2, 0.3}) + 0.01 * random_cloud(rng, 15);
    const double o = 1000.0 * (horn_align(a, b) - b).rowwise().norm().mean();
    CHECK(pa_mpjpe_mm(a, b) == doctest::Approx(o).epsilon(1e-9));
  }
}

TEST_CASE("a mirror image cannot be aligned by a proper rotation") {
  std::mt19937_64 rng(86);
  const Points3d gt = random_cloud(rng, 21);
  Points3d mirrored = gt;
  mirrored.col(0) *= -1.0;
  CHECK(pa_mpjpe_mm(mirrored, gt) > 1.0);
  const SimilarityTransform t = procrustes_similarity(mirrored, gt);
  CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate point sets are rejected") {
  Points3d line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) << i, 2 * i, 3 * i;
  std::mt19937_64 rng(87);
  const Points3d cloud = random_cloud(rng, 5);
  CHECK_THROWS_AS(pa_mpjpe_mm(line, cloud), InvariantError);
  CHECK_THROWS_AS(pa_mpjpe_mm(cloud, Points3d::Zero(5, 3)), InvariantError);
  CHECK_THROWS_AS(pa_mpjpe_mm(cloud, random_cloud(rng, 4)), DimensionError);
}

TEST_CASE("supervision loss terms") {
  std::mt19937_64 rng(88);
  const HandState s = test::random_state(hand(), rng, 30.0);
  const Points3d kp = pose_mesh(hand(), s).keypoints21;
  PosePair p{s, s, kp, kp};
  CHECK(pose_supervision_loss(p) == 0.0);

  p.predicted_keypoints->row(4) += Eigen::RowVector3d(0.001, 0.0, 0.0);
  CHECK(pose_supervision_loss(p) == doctest::Approx(0.001).epsilon(1e-9));

  p.predicted_keypoints = kp;
  p.predicted.pose(2, 1) += 0.1;
  CHECK(pose_supervision_loss(p) == doctest::Approx(0.01).epsilon(1e-9));

  // Positive whenever anything differs.
  for (int trial = 0; trial < 10; ++trial) {
    PosePair q{test::random_state(hand(), rng, 30.0), s, random_cloud(rng, 21), kp};
    CHECK(pose_supervision_loss(q) > 0.0);
  }
  p.ground_truth_keypoints.reset();
  CHECK_THROWS_AS(pose_supervision_loss(p), InvariantError);
}

TEST_CASE("tap angles read the MCP flexion") {
  std::vector<HandState> states;
  for (double deg : {0.0, 10.0, -25.0, 60.0}) {
    HandState s = HandState::neutral(hand().shape_rank());
    // row j - 1 holds joint j; the index MCP keypoint sits on a template joint
    const int joint = hand().keypoint_map[static_cast<std::size_t>(keypoint::mcp_of(Part::Index))].index;
    s.pose.row(joint - 1) << radians(deg), 0.0, 0.0;
    states.push_back(s);
  }
  const auto angles = tap_angles(hand(), states, Part::Index);
  REQUIRE(angles.size() == 4);
  CHECK(angles[0] == doctest::Approx(0.0));
  CHECK(angles[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(angles[2] == doctest::Approx(-25.0).epsilon(1e-12));
  CHECK(angles[3] == doctest::Approx(60.0).epsilon(1e-12));
  CHECK_THROWS_AS(tap_angles(hand(), states, Part::Thumb), InvariantError);
}

TEST_CASE("tap RMSE: identity, constant bias and sampled sinusoids") {
  const int joint = hand().keypoint_map[static_cast<std::size_t>(keypoint::mcp_of(Part::Middle))].index;
  auto series = [&](const std::vector<double>& deg) {
    std::vector<HandState> out;
    for (double d : deg) {
      HandState s = HandState::neutral(hand().shape_rank());
      s.pose(joint - 1, 0) = radians(d);
      out.push_back(s);
    }
    return out;
  };
  const int n = 40;
  const double amp = 30.0;
  const double phase = 0.7;
  std::vector<double> gt;
  std::vector<double> shifted;
  std::vector<double> biased;
  for (int i = 0; i < n; ++i) {
    const double w = 2.0 * std::numbers::pi * 3.0 * i / n;  // three whole periods
    gt.push_back(amp * std::sin(w));
    shifted.push_back(amp * std::sin(w + phase));
    biased.push_back(gt.back() + 5.0);
  }
  CHECK(tap_angle_series(hand(), series(gt), series(gt), Part::Middle).rmse == doctest::Approx(0.0));
  CHECK(tap_angle_series(hand(), series(biased), series(gt), Part::Middle).rmse == doctest::Approx(5.0).epsilon(1e-9));
  // sin(w + p) - sin(w) = 2 sin(p / 2) cos(w + p / 2), whose RMS over whole
  // periods is sqrt(2) |sin(p / 2)|.
  const double expected = amp * std::sqrt(2.0) * std::abs(std::sin(phase / 2.0));
  CHECK(tap_angle_series(hand(), series(shifted), series(gt), Part::Middle).rmse ==
        doctest::Approx(expected).epsilon(1e-9));
  CHECK_THROWS_AS(tap_angle_series(hand(), series({1, 2}), series({1}), Part::Middle), DimensionError);
}

TEST_CASE("pinch distances") {
  auto mesh_with_tips = [](const Eigen::RowVector3d& index_tip, const Eigen::RowVector3d& thumb_tip) {
    HandMesh m;
    m.keypoints21 = Points3d::Zero(kNumKeypoints, 3);
    m.keypoints21.row(keypoint::tip_of(Part::Index)) = index_tip;
    m.keypoints21.row(keypoint::tip_of(Part::Thumb)) = thumb_tip;
    return m;
  };
  const std::vector<HandMesh> series = {mesh_with_tips({0.04, 0.0, 0.0}, {0, 0, 0}),
                                        mesh_with_tips({0.1, 0.2, 0.3}, {0.1, 0.206, 0.308}),
                                        mesh_with_tips({0.5, 0.5, 0.5}, {0.5, 0.5, 0.5})};
  const auto d = pinch_distances(series, Part::Index);
  CHECK(d[0] == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(d[2] == 0.0);
  CHECK(pinch_distance_series(series, series, Part::Index).rmse == 0.0);
  CHECK_THROWS_AS(pinch_distances(series, Part::Pinky), InvariantError);
  const std::vector<HandMesh> shorter(series.begin(), series.begin() + 2);
  CHECK_THROWS_AS(pinch_distance_series(series, shorter, Part::Index), DimensionError);
}

TEST_CASE("frame metrics fill in keypoints from the template") {
  std::mt19937_64 rng(89);
  const HandState s = test::random_state(hand(), rng, 30.0);
  const MetricReport same = frame_metrics(hand(), {s, s, std::nullopt, std::nullopt});
  CHECK(same.mpjae.mean_deg == 0.0);
  CHECK(same.pa_mpjpe_mm < 1e-9);
  const HandState other = test::random_state(hand(), rng, 30.0);
  const MetricReport diff = frame_metrics(hand(), {other, s, std::nullopt, std::nullopt});
  CHECK(diff.mpjae.mean_deg > 0.0);
  CHECK(diff.pa_mpjpe_mm == doctest::Approx(pa_mpjpe_mm(pose_mesh(hand(), other).keypoints21,
                                                        pose_mesh(hand(), s).keypoints21)));
}

}  // TEST_SUITE
