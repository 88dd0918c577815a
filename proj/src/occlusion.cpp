#include "dorsal/occlusion.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dorsal {

void validate(const RasterConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0) throw InvariantError("raster dimensions must be positive");
  if (!(cfg.depth_epsilon >= 0.0)) throw InvariantError("depth_epsilon must be non-negative");
}

std::vector<int> backface_filter(const Points3d& v, const FaceIndices& faces) {
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(faces.rows()));
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Eigen::Vector3d a = v.row(faces(f, 0)).transpose();
    const Eigen::Vector3d b = v.row(faces(f, 1)).transpose();
    const Eigen::Vector3d c = v.row(faces(f, 2)).transpose();
    const Eigen::Vector3d n = (b - a).cross(c - a);
    const Eigen::Vector3d centroid = (a + b + c) / 3.0;
    if (n.dot(centroid) < 0.0) kept.push_back(static_cast<int>(f));
  }
  return kept;
}

std::vector<int> backface_filter(const HandMesh& mesh_cam) { return backface_filter(mesh_cam.vertices, mesh_cam.faces); }

namespace {

struct ScreenTriangle {
  int face;
  std::array<Eigen::Vector2d, 3> p;  // raster coordinates, pixel centres at k + 0.5
  std::array<double, 3> inv_z;
  double area2;
  double centroid_depth;
};

inline double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

// Calls fn(pixel_index, depth) for every pixel centre inside the triangle.
template <typename Fn>
void scan_triangle(const ScreenTriangle& t, int width, int height, Fn&& fn) {
  const double min_x = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()});
  const double max_x = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()});
  const double min_y = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()});
  const double max_y = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()});
  const int c0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
  const int c1 = std::min(width - 1, static_cast<int>(std::floor(max_x - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(max_y - 0.5)));
  const double inv_area = 1.0 / t.area2;
  for (int r = r0; r <= r1; ++r) {
    const double py = r + 0.5;
    for (int c = c0; c <= c1; ++c) {
      const double px = c + 0.5;
      const double b0 = edge(t.p[1], t.p[2], px, py) * inv_area;
      const double b1 = edge(t.p[2], t.p[0], px, py) * inv_area;
      const double b2 = edge(t.p[0], t.p[1], px, py) * inv_area;
      if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) continue;
      const double inv_z = b0 * t.inv_z[0] + b1 * t.inv_z[1] + b2 * t.inv_z[2];
      fn(static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c), 1.0 / inv_z);
    }
  }
}

}  // namespace

ZBufferResult rasterize_zbuffer(const Points3d& v, const FaceIndices& faces, std::span<const int> candidates,
                                const CameraRig& rig, const RasterConfig& cfg) {
  validate(cfg);
  ZBufferResult out;
  const auto nf = static_cast<std::size_t>(faces.rows());
  out.won_pixels.assign(nf, 0);
  out.covered_pixels.assign(nf, 0);
  out.visible.assign(nf, false);

  const Projection<double> proj = project(rig, v);

  std::vector<int> usable;
  usable.reserve(candidates.size());
  double umin = std::numeric_limits<double>::infinity();
  double vmin = umin;
  double umax = -umin;
  double vmax = -umin;
  for (int f : candidates) {
    bool ok = true;
    for (int k = 0; k < 3; ++k) ok = ok && proj.valid(faces(f, k));
    if (!ok) {
      ++out.clipped_faces;
      continue;
    }
    usable.push_back(f);
    for (int k = 0; k < 3; ++k) {
      const int i = faces(f, k);
      umin = std::min(umin, proj.pixels(i, 0));
      umax = std::max(umax, proj.pixels(i, 0));
      vmin = std::min(vmin, proj.pixels(i, 1));
      vmax = std::max(vmax, proj.pixels(i, 1));
    }
  }
  out.grid.width = cfg.width;
  out.grid.height = cfg.height;
  if (usable.empty()) return out;

  out.grid.u0 = umin;
  out.grid.v0 = vmin;
  out.grid.du = umax > umin ? (umax - umin) / cfg.width : 1.0;
  out.grid.dv = vmax > vmin ? (vmax - vmin) / cfg.height : 1.0;

  std::vector<ScreenTriangle> tris;
  tris.reserve(usable.size());
  for (int f : usable) {
    ScreenTriangle t{};
    t.face = f;
    double depth_sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int i = faces(f, k);
      t.p[k] = {(proj.pixels(i, 0) - out.grid.u0) / out.grid.du, (proj.pixels(i, 1) - out.grid.v0) / out.grid.dv};
      t.inv_z[k] = 1.0 / v(i, 2);
      depth_sum += v(i, 2);
    }
    t.area2 = edge(t.p[0], t.p[1], t.p[2].x(), t.p[2].y());
    t.centroid_depth = depth_sum / 3.0;
    tris.push_back(t);
  }

  const std::size_t npix = static_cast<std::size_t>(cfg.width) * static_cast<std::size_t>(cfg.height);
  std::vector<double> zbuf(npix, std::numeric_limits<double>::infinity());

  for (const auto& t : tris) {
    if (t.area2 == 0.0) continue;
    scan_triangle(t, cfg.width, cfg.height, [&](std::size_t px, double z) {
      if (z < zbuf[px]) zbuf[px] = z;
    });
  }

  const double eps = cfg.depth_epsilon;
  for (const auto& t : tris) {
    const auto f = static_cast<std::size_t>(t.face);
    if (t.area2 != 0.0) {
      scan_triangle(t, cfg.width, cfg.height, [&](std::size_t px, double z) {
        ++out.covered_pixels[f];
        if (z <= zbuf[px] + eps) ++out.won_pixels[f];
      });
    }
    if (out.covered_pixels[f] == 0) {
      // Sub-pixel face: one sample at the projected centroid.
      const Eigen::Vector2d c = (t.p[0] + t.p[1] + t.p[2]) / 3.0;
      const int col = std::clamp(static_cast<int>(std::floor(c.x())), 0, cfg.width - 1);
      const int row = std::clamp(static_cast<int>(std::floor(c.y())), 0, cfg.height - 1);
      const double buffered = zbuf[static_cast<std::size_t>(row) * static_cast<std::size_t>(cfg.width) +
                                   static_cast<std::size_t>(col)];
      out.covered_pixels[f] = 1;
      out.won_pixels[f] = t.centroid_depth <= buffered + eps ? 1 : 0;
    }
    out.visible[f] = out.won_pixels[f] > 0;
  }
  return out;
}

ZBufferResult rasterize_zbuffer(const HandMesh& mesh_cam, std::span<const int> candidates, const CameraRig& rig,
                                const RasterConfig& cfg) {
  return rasterize_zbuffer(mesh_cam.vertices, mesh_cam.faces, candidates, rig, cfg);
}

int VisibilityReport::occluded_finger_count() const {
  return static_cast<int>(std::count(fully_occluded.begin(), fully_occluded.end(), true));
}

int VisibilityReport::visible_finger_count() const {
  return static_cast<int>(std::count(fully_visible.begin(), fully_visible.end(), true));
}

VisibilityReport summarize_visibility(const Eigen::VectorXd& face_areas, std::vector<double> visible_areas,
                                      std::span<const Part> labels, const VisibilityThresholds& th) {
  VisibilityReport rep;
  for (std::size_t f = 0; f < labels.size(); ++f) {
    const auto p = static_cast<std::size_t>(index_of(labels[f]));
    rep.part_area[p] += face_areas(static_cast<Eigen::Index>(f));
    rep.part_visible_area[p] += visible_areas[f];
  }
  rep.per_face_visible_area = std::move(visible_areas);

  for (Part part : kAllParts) {
    const auto p = static_cast<std::size_t>(index_of(part));
    if (rep.part_area[p] > 0.0) {
      rep.raw_visibility[p] = std::clamp(rep.part_visible_area[p] / rep.part_area[p], 0.0, 1.0);
    } else {
      rep.raw_visibility[p] = 0.0;
      rep.warnings.push_back("part '" + std::string(part_name(part)) + "' has zero total area; visibility set to 0");
    }
    rep.per_part_visibility[p] = is_finger(part) ? std::min(rep.raw_visibility[p] / th.finger_scale, 1.0)
                                                 : rep.raw_visibility[p];
  }

  double sum = 0.0;
  for (int i = 0; i < kNumFingers; ++i) {
    const auto p = static_cast<std::size_t>(i);
    sum += rep.per_part_visibility[p];
    const double v = th.threshold_on_scaled ? rep.per_part_visibility[p] : rep.raw_visibility[p];
    rep.fully_occluded[p] = v <= th.fully_occluded;
    rep.fully_visible[p] = v > th.fully_visible;
  }
  rep.mean_finger_visibility = sum / kNumFingers;
  return rep;
}

VisibilityReport visibility_report(const HandMesh& mesh, const RiggedHandTemplate& tmpl, const CameraRig& rig,
                                   const OcclusionConfig& cfg) {
  if (mesh.faces.rows() != tmpl.num_faces()) throw DimensionError("mesh and template face counts differ");
  const Points3d cam = world_to_camera(rig, mesh.vertices);
  const std::vector<int> front = backface_filter(cam, mesh.faces);
  const ZBufferResult zb = rasterize_zbuffer(cam, mesh.faces, front, rig, cfg.raster);

  const Eigen::VectorXd areas = triangle_areas(mesh.vertices, mesh.faces);
  std::vector<double> visible(static_cast<std::size_t>(mesh.faces.rows()), 0.0);
  for (int f : front) {
    const auto i = static_cast<std::size_t>(f);
    if (zb.covered_pixels[i] > 0) {
      visible[i] = areas(f) * static_cast<double>(zb.won_pixels[i]) / static_cast<double>(zb.covered_pixels[i]);
    }
  }
  VisibilityReport rep = summarize_visibility(areas, std::move(visible), tmpl.part_labels, cfg.thresholds);
  if (zb.clipped_faces > 0) {
    rep.warnings.push_back(std::to_string(zb.clipped_faces) + " faces behind the near plane were skipped");
  }
  return rep;
}

OcclusionAggregate dataset_occlusion_stats(std::span<const VisibilityReport> reports) {
  if (reports.empty()) throw Error("dataset_occlusion_stats needs at least one report");
  OcclusionAggregate agg;
  agg.frames = reports.size();
  std::vector<double> dorsal;
  std::size_t occluded_frames = 0;
  for (const auto& r : reports) {
    ++agg.visible_finger_histogram[static_cast<std::size_t>(r.visible_finger_count())];
    const int occ = r.occluded_finger_count();
    ++agg.occluded_finger_histogram[static_cast<std::size_t>(occ)];
    if (occ > 0) {
      ++occluded_frames;
      dorsal.push_back(r.visibility(Part::Dorsum));
    }
  }
  agg.occluded_frame_fraction = static_cast<double>(occluded_frames) / static_cast<double>(agg.frames);
  if (!dorsal.empty()) agg.dorsal_when_occluded = percentile_summary(dorsal);
  return agg;
}

}  // namespace dorsal
