#include "dorsal/occlusion.hpp"
#include "dorsal/synthetic_hand.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace dorsal;

namespace {

struct Scene {
  Points3d vertices;
  FaceIndices faces;
};

Scene triangle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  Scene s;
  s.vertices.resize(3, 3);
  s.vertices << a.transpose(), b.transpose(), c.transpose();
  s.faces.resize(1, 3);
  s.faces << 0, 1, 2;
  return s;
}

void append(Scene& s, const Scene& other) {
  const auto nv = s.vertices.rows();
  const auto nf = s.faces.rows();
  s.vertices.conservativeResize(nv + other.vertices.rows(), 3);
  s.vertices.bottomRows(other.vertices.rows()) = other.vertices;
  s.faces.conservativeResize(nf + other.faces.rows(), 3);
  s.faces.bottomRows(other.faces.rows()) = other.faces.array() + static_cast<int>(nv);
}

// Axis-aligned square at depth z facing the camera.
Scene square(double x0, double y0, double x1, double y1, double z) {
  Scene s;
  s.vertices.resize(4, 3);
  s.vertices << x0, y0, z, x1, y0, z, x1, y1, z, x0, y1, z;
  s.faces.resize(2, 3);
  s.faces << 0, 2, 1, 0, 3, 2;
  return s;
}

std::vector<int> all_faces(const FaceIndices& f) {
  std::vector<int> out(static_cast<std::size_t>(f.rows()));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

RasterConfig raster(int n) {
  RasterConfig cfg;
  cfg.width = cfg.height = n;
  return cfg;
}

// One face per part, unit areas, the given raw visible fractions.
VisibilityReport report_from(const std::array<double, kNumParts>& raw, const VisibilityThresholds& th = {}) {
  Eigen::VectorXd areas = Eigen::VectorXd::Ones(kNumParts);
  std::vector<double> visible(raw.begin(), raw.end());
  return summarize_visibility(areas, visible, kAllParts, th);
}

// Pose the synthetic hand so its back faces a camera 40 cm away.
CameraRig dorsal_view_rig() {
  CameraRig rig = test::simple_rig();
  rig.translation = Eigen::Vector3d(0.0, -0.045, 0.4);
  return rig;
}

}  // namespace

TEST_SUITE("occlusion_analysis") {

TEST_CASE("backface filter keeps a facing triangle and drops it when the winding is reversed") {
  const Scene facing = triangle({0, 0, 1}, {0, 1, 1}, {1, 0, 1});
  // normal (0,1,0)x(1,0,0) = (0,0,-1), towards the camera
  CHECK(backface_filter(facing.vertices, facing.faces) == std::vector<int>{0});
  const Scene reversed = triangle({0, 0, 1}, {1, 0, 1}, {0, 1, 1});
  CHECK(backface_filter(reversed.vertices, reversed.faces).empty());
}

TEST_CASE("backface filter on a closed cube matches per-face dot products") {
  std::mt19937_64 rng(31);
  // Outward-wound unit cube.
  Points3d cube(8, 3);
  cube << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 1;
  FaceIndices faces(12, 3);
  faces << 0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4, 3, 6, 2, 3, 7, 6, 0, 4, 7, 0, 7, 3, 1, 2, 6, 1, 6, 5;
  const Eigen::RowVector3d centre(0.5, 0.5, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Matrix3d r = test::random_rotation(rng);
    const Eigen::RowVector3d offset(test::uniform(rng, -1, 1), test::uniform(rng, -1, 1), test::uniform(rng, 4, 8));
    Points3d v = (cube.rowwise() - centre) * r.transpose();
    v.rowwise() += offset;
    std::vector<int> expected;
    for (int f = 0; f < 12; ++f) {
      // Outward normal from the cube centre through the face centroid.
      const Eigen::RowVector3d cen = (v.row(faces(f, 0)) + v.row(faces(f, 1)) + v.row(faces(f, 2))) / 3.0;
      const Eigen::Vector3d a = v.row(faces(f, 0)).transpose();
      const Eigen::Vector3d n = (Eigen::Vector3d(v.row(faces(f, 1)).transpose()) - a)
                                    .cross(Eigen::Vector3d(v.row(faces(f, 2)).transpose()) - a);
      REQUIRE(n.dot((cen - offset).transpose()) > 0.0);
      if (n.dot(cen.transpose()) < 0.0) expected.push_back(f);
    }
    const auto kept = backface_filter(v, faces);
    CHECK(kept == expected);
    // A cube seen from outside shows one to three sides, two triangles each.
    CHECK(kept.size() >= 2);
    CHECK(kept.size() <= 6);
  }
}

TEST_CASE("single triangle coverage equals a brute-force point-in-triangle scan") {
  std::mt19937_64 rng(32);
  const CameraRig rig = test::simple_rig();
  for (int trial = 0; trial < 20; ++trial) {
    Scene s = triangle({test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), test::uniform(rng, 1, 3)},
                       {test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), test::uniform(rng, 1, 3)},
                       {test::uniform(rng, -0.3, 0.3), test::uniform(rng, -0.3, 0.3), test::uniform(rng, 1, 3)});
    const RasterConfig cfg = raster(64);
    const std::vector<int> cand{0};
    const ZBufferResult zb = rasterize_zbuffer(s.vertices, s.faces, cand, rig, cfg);
    const auto proj = project(rig, s.vertices);
    std::array<Eigen::Vector2d, 3> p;
    for (int k = 0; k < 3; ++k) p[k] = proj.pixels.row(k).transpose();
    auto cross = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& q) {
      return (b - a).x() * (q - a).y() - (b - a).y() * (q - a).x();
    };
    // When two vertices sit on opposite corners of the bounding box, an edge
    // runs exactly through a diagonal of pixel centres; those ties are
    // counted separately and may go either way.
    const double tie = 1e-9 * std::abs(cross(p[0], p[1], p[2]));
    int inside = 0;
    int ties = 0;
    for (int r = 0; r < cfg.height; ++r) {
      for (int c = 0; c < cfg.width; ++c) {
        const Eigen::Vector2d q = zb.grid.pixel_center(c, r);
        const std::array<double, 3> e = {cross(p[0], p[1], q), cross(p[1], p[2], q), cross(p[2], p[0], q)};
        const bool pos = e[0] > tie && e[1] > tie && e[2] > tie;
        const bool neg = e[0] < -tie && e[1] < -tie && e[2] < -tie;
        const bool loose_pos = e[0] >= -tie && e[1] >= -tie && e[2] >= -tie;
        const bool loose_neg = e[0] <= tie && e[1] <= tie && e[2] <= tie;
        if (pos || neg) {
          ++inside;
        } else if (loose_pos || loose_neg) {
          ++ties;
        }
      }
    }
    CHECK(zb.covered_pixels[0] >= inside);
    CHECK(zb.covered_pixels[0] <= inside + ties);
    CHECK(zb.won_pixels[0] == zb.covered_pixels[0]);
    CHECK(zb.visible[0]);
  }
}

TEST_CASE("a strictly nearer triangle hides the one behind it") {
  const CameraRig rig = test::simple_rig();
  Scene s = square(-0.5, -0.5, 0.5, 0.5, 1.0);
  append(s, triangle({-0.1, -0.1, 2.0}, {-0.1, 0.1, 2.0}, {0.1, -0.1, 2.0}));
  const ZBufferResult zb = rasterize_zbuffer(s.vertices, s.faces, all_faces(s.faces), rig, raster(128));
  CHECK(zb.covered_pixels[2] > 0);
  CHECK(zb.won_pixels[2] == 0);
  CHECK_FALSE(zb.visible[2]);
  CHECK(zb.visible[0]);
  CHECK(zb.visible[1]);
}

TEST_CASE("faces behind the camera are skipped") {
  const CameraRig rig = test::simple_rig();
  const Scene s = triangle({0, 0, -1}, {0, 1, -1}, {1, 0, -1});
  const ZBufferResult zb = rasterize_zbuffer(s.vertices, s.faces, all_faces(s.faces), rig, raster(32));
  CHECK(zb.won_pixels[0] == 0);
  CHECK(zb.covered_pixels[0] == 0);
  CHECK_FALSE(zb.visible[0]);
  CHECK(zb.clipped_faces == 1);
}

TEST_CASE("raster configuration is validated") {
  const Scene s = triangle({0, 0, 1}, {0, 1, 1}, {1, 0, 1});
  CHECK_THROWS_AS(rasterize_zbuffer(s.vertices, s.faces, all_faces(s.faces), test::simple_rig(), raster(0)),
                  InvariantError);
  RasterConfig cfg;
  cfg.depth_epsilon = -1.0;
  CHECK_THROWS_AS(validate(cfg), InvariantError);
}

TEST_CASE("half-covered plane is half visible and agrees with ray casting") {
  const CameraRig rig = test::simple_rig();
  // B spans x in [-0.5, 0.5] at z = 2; A covers its left half at z = 1.
  Scene s = square(-0.5, -0.5, 0.5, 0.5, 2.0);
  append(s, square(-0.25, -0.25, 0.0, 0.25, 1.0));
  const auto front = backface_filter(s.vertices, s.faces);
  REQUIRE(front.size() == 4);
  const ZBufferResult zb = rasterize_zbuffer(s.vertices, s.faces, front, rig, raster(512));
  const Eigen::VectorXd areas = triangle_areas(s.vertices, s.faces);
  double b_visible = 0.0;
  for (int f = 0; f < 2; ++f) {
    b_visible += areas(f) * zb.won_pixels[static_cast<std::size_t>(f)] / zb.covered_pixels[static_cast<std::size_t>(f)];
  }
  const double b_area = areas(0) + areas(1);
  CHECK(b_visible / b_area == doctest::Approx(0.5).epsilon(0.01));

  const auto oracle = test::raycast_visibility(s.vertices, s.faces, 16);
  const double oracle_b = (oracle.visible_area[0] + oracle.visible_area[1]) / b_area;
  CHECK(std::abs(oracle_b - 0.5) < 0.02);
  CHECK(std::abs(oracle_b - b_visible / b_area) < 0.02);
}

TEST_CASE("adding an occluder in front never increases visibility") {
  std::mt19937_64 rng(33);
  const CameraRig rig = test::simple_rig();
  for (int trial = 0; trial < 10; ++trial) {
    Scene base = square(-0.5, -0.5, 0.5, 0.5, 3.0);
    for (int k = 0; k < 6; ++k) {
      const double x = test::uniform(rng, -0.3, 0.2);
      const double y = test::uniform(rng, -0.3, 0.2);
      append(base, square(x, y, x + 0.1, y + 0.1, test::uniform(rng, 2.0, 2.9)));
    }
    const RasterConfig cfg = raster(256);
    const ZBufferResult before = rasterize_zbuffer(base.vertices, base.faces, all_faces(base.faces), rig, cfg);
    Scene more = base;
    const double x = test::uniform(rng, -0.2, 0.05);
    append(more, square(x, x, x + 0.15, x + 0.15, 1.5));
    const ZBufferResult after = rasterize_zbuffer(more.vertices, more.faces, all_faces(more.faces), rig, cfg);
    // Occluder projects inside the existing bounding box, so the grid is shared.
    REQUIRE(after.grid.u0 == before.grid.u0);
    REQUIRE(after.grid.du == before.grid.du);
    for (Eigen::Index f = 0; f < base.faces.rows(); ++f) {
      const auto i = static_cast<std::size_t>(f);
      CHECK(after.covered_pixels[i] == before.covered_pixels[i]);
      CHECK(after.won_pixels[i] <= before.won_pixels[i]);
    }
  }
}

TEST_CASE("synthetic hand seen from behind shows its back and hides its palm") {
  const RiggedHandTemplate tmpl = make_synthetic_hand();
  const HandMesh mesh = pose_mesh(tmpl, HandState::neutral(tmpl.shape_rank()));
  const VisibilityReport rep = visibility_report(mesh, tmpl, dorsal_view_rig());
  CHECK(rep.visibility(Part::Dorsum) > 0.98);
  CHECK(rep.visibility(Part::Palm) == 0.0);
  for (Part f : kFingers) {
    // Roughly half of each tube faces the camera; tapering and the tip caps
    // keep the scaled value a little under 1.
    CHECK(rep.visibility(f) > 0.75);
    CHECK(rep.visibility(f) <= 1.0);
  }
  CHECK(rep.warnings.empty());
}

TEST_CASE("report invariants hold on random poses") {
  const RiggedHandTemplate tmpl = make_synthetic_hand();
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const HandMesh mesh = pose_mesh(tmpl, test::random_state(tmpl, rng, 60.0));
    OcclusionConfig cfg;
    cfg.raster = raster(256);
    const VisibilityReport rep = visibility_report(mesh, tmpl, dorsal_view_rig(), cfg);
    const Eigen::VectorXd areas = triangle_areas(mesh.vertices, mesh.faces);
    for (Eigen::Index f = 0; f < areas.size(); ++f) {
      CHECK(rep.per_face_visible_area[static_cast<std::size_t>(f)] >= 0.0);
      CHECK(rep.per_face_visible_area[static_cast<std::size_t>(f)] <= areas(f) * (1 + 1e-12));
    }
    double mean = 0.0;
    for (Part p : kAllParts) {
      CHECK(rep.visibility(p) >= 0.0);
      CHECK(rep.visibility(p) <= 1.0);
      if (is_finger(p)) mean += rep.visibility(p) / kNumFingers;
    }
    CHECK(rep.mean_finger_visibility == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("visibility converges between 512 and 1024 rasters") {
  const RiggedHandTemplate tmpl = make_synthetic_hand();
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 5; ++trial) {
    const HandMesh mesh = pose_mesh(tmpl, test::random_state(tmpl, rng, 45.0));
    OcclusionConfig lo;
    lo.raster = raster(512);
    OcclusionConfig hi;
    hi.raster = raster(1024);
    const auto a = visibility_report(mesh, tmpl, dorsal_view_rig(), lo);
    const auto b = visibility_report(mesh, tmpl, dorsal_view_rig(), hi);
    for (Part p : kAllParts) CHECK(std::abs(a.raw_visibility[index_of(p)] - b.raw_visibility[index_of(p)]) < 0.02);
  }
}

TEST_CASE("a part rendered alone is only limited by its own geometry") {
  const RiggedHandTemplate tmpl = make_synthetic_hand();
  std::mt19937_64 rng(36);
  const HandMesh mesh = pose_mesh(tmpl, test::random_state(tmpl, rng, 60.0));
  const CameraRig rig = dorsal_view_rig();
  const Points3d cam = world_to_camera(rig, mesh.vertices);
  const Eigen::VectorXd areas = triangle_areas(mesh.vertices, mesh.faces);
  const auto front = backface_filter(cam, mesh.faces);
  const RasterConfig cfg = raster(1024);
  const ZBufferResult full = rasterize_zbuffer(cam, mesh.faces, front, rig, cfg);
  for (Part part : kFingers) {
    std::vector<int> only;
    for (int f : front) {
      if (tmpl.part_labels[static_cast<std::size_t>(f)] == part) only.push_back(f);
    }
    const ZBufferResult alone = rasterize_zbuffer(cam, mesh.faces, only, rig, cfg);
    double alone_area = 0.0;
    double full_area = 0.0;
    double total = 0.0;
    for (Eigen::Index f = 0; f < areas.size(); ++f) {
      const auto i = static_cast<std::size_t>(f);
      if (tmpl.part_labels[i] != part) continue;
      total += areas(f);
      if (alone.covered_pixels[i] > 0) alone_area += areas(f) * alone.won_pixels[i] / alone.covered_pixels[i];
      if (full.covered_pixels[i] > 0) full_area += areas(f) * full.won_pixels[i] / full.covered_pixels[i];
    }
    // Grids differ, so allow raster-level slack.
    CHECK(alone_area / total >= full_area / total - 0.02);
    // Ray-cast oracle restricted to the part.
    FaceIndices sub(static_cast<Eigen::Index>(only.size()), 3);
    double sub_area = 0.0;
    for (std::size_t k = 0; k < only.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = mesh.faces.row(only[k]);
    const auto oracle = test::raycast_visibility(cam, sub, 8);
    for (double a : oracle.visible_area) sub_area += a;
    CHECK(std::abs(alone_area / total - sub_area / total) < 0.02);
  }
}

TEST_CASE("finger scaling and threshold order") {
  std::array<double, kNumParts> raw{0.08, 0.05, 0.5, 0.46, 0.44, 0.7, 0.0};
  const VisibilityReport scaled = report_from(raw);
  CHECK(scaled.visibility(Part::Index) == doctest::Approx(0.16));
  CHECK_FALSE(scaled.fully_occluded[0]);
  // 0.05 / 0.5 lands exactly on the 0.10 cutoff
  CHECK(scaled.fully_occluded[1]);
  CHECK(scaled.visibility(Part::Ring) == 1.0);
  CHECK(scaled.fully_visible[2]);
  CHECK(scaled.fully_visible[3]);  // 0.92
  CHECK_FALSE(scaled.fully_visible[4]);  // 0.88
  CHECK(scaled.visibility(Part::Dorsum) == 0.7);
  CHECK(scaled.visibility(Part::Palm) == 0.0);
  CHECK(scaled.occluded_finger_count() == 1);
  CHECK(scaled.visible_finger_count() == 2);

  VisibilityThresholds raw_th;
  raw_th.threshold_on_scaled = false;
  const VisibilityReport unscaled = report_from(raw, raw_th);
  // 8% of the surface visible is fully occluded when thresholds see raw fractions.
  CHECK(unscaled.fully_occluded[0]);
  CHECK(unscaled.visibility(Part::Index) == doctest::Approx(0.16));
  CHECK(unscaled.visible_finger_count() == 0);
}

TEST_CASE("a part with zero area reports zero visibility and a warning") {
  Eigen::VectorXd areas = Eigen::VectorXd::Ones(kNumParts);
  areas(index_of(Part::Palm)) = 0.0;
  std::vector<double> visible(kNumParts, 0.5);
  visible[index_of(Part::Palm)] = 0.0;
  const VisibilityReport rep = summarize_visibility(areas, visible, kAllParts, {});
  CHECK(rep.visibility(Part::Palm) == 0.0);
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find("palm") != std::string::npos);
}

TEST_CASE("dataset aggregates") {
  SUBCASE("all fingers visible") {
    std::vector<VisibilityReport> reps(4, report_from({1, 1, 1, 1, 1, 0.5, 0}));
    const auto agg = dataset_occlusion_stats(reps);
    CHECK(agg.frames == 4);
    CHECK(agg.visible_finger_histogram[5] == 4);
    CHECK(agg.occluded_frame_fraction == 0.0);
    CHECK_FALSE(agg.dorsal_when_occluded.has_value());
  }
  SUBCASE("hand tally over ten frames") {
    // (index, middle, ring, pinky, thumb, dorsum) raw fractions
    const std::vector<std::array<double, kNumParts>> raw = {
        {{0.50, 0.50, 0.50, 0.50, 0.50, 0.9, 0}},  // 5 visible
        {{0.01, 0.50, 0.50, 0.50, 0.50, 0.8, 0}},  // 4 visible, 1 occluded
        {{0.01, 0.02, 0.50, 0.50, 0.50, 0.1, 0}},  // 3 visible, 2 occluded
        {{0.30, 0.30, 0.30, 0.30, 0.30, 0.5, 0}},  // none
        {{0.00, 0.00, 0.00, 0.00, 0.00, 0.3, 0}},  // 5 occluded
        {{0.46, 0.46, 0.40, 0.40, 0.40, 0.6, 0}},  // 2 visible
        {{0.46, 0.46, 0.46, 0.40, 0.04, 0.2, 0}},  // 3 visible, 1 occluded
        {{0.50, 0.50, 0.50, 0.50, 0.50, 1.0, 0}},  // 5 visible
        {{0.06, 0.50, 0.50, 0.50, 0.50, 0.4, 0}},  // 4 visible, none occluded (0.12)
        {{0.20, 0.20, 0.20, 0.20, 0.20, 0.7, 0}},  // none
    };
    std::vector<VisibilityReport> reps;
    for (const auto& r : raw) reps.push_back(report_from(r));
    const auto agg = dataset_occlusion_stats(reps);
    const std::array<std::size_t, 6> visible_hist{3, 0, 1, 2, 2, 2};
    const std::array<std::size_t, 6> occluded_hist{6, 2, 1, 0, 0, 1};
    CHECK(agg.visible_finger_histogram == visible_hist);
    CHECK(agg.occluded_finger_histogram == occluded_hist);
    CHECK(agg.occluded_frame_fraction == doctest::Approx(0.4));
    REQUIRE(agg.dorsal_when_occluded.has_value());
    // dorsum over frames 2, 3, 5, 7: {0.8, 0.1, 0.3, 0.2}
    CHECK(agg.dorsal_when_occluded->min == doctest::Approx(0.1));
    CHECK(agg.dorsal_when_occluded->max == doctest::Approx(0.8));
    CHECK(agg.dorsal_when_occluded->median == doctest::Approx(0.25));
  }
  SUBCASE("empty input") {
    std::vector<VisibilityReport> none;
    CHECK_THROWS_AS(dataset_occlusion_stats(none), Error);
  }
}

}  // TEST_SUITE
