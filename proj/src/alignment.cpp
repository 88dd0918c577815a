#include "dorsal/alignment.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dorsal {

Homography::Homography(const Eigen::Matrix3d& m) : m_(m) {
  if (!m.allFinite()) throw InvariantError("homography has non-finite entries");
  if (std::abs(m_(2, 2)) > 1e-12) {
    m_ /= m_(2, 2);
  } else if (m_.norm() > 0.0) {
    m_ /= m_.norm();
  }
  if (!(std::abs(m_.determinant()) > 1e-12)) throw InvariantError("homography is singular (|det| <= 1e-12)");
}

Eigen::Vector2d Homography::apply(const Eigen::Vector2d& p) const {
  const Eigen::Vector3d q = m_ * p.homogeneous();
  return q.hnormalized();
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scaling(double sx, double sy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return Homography(m);
}

namespace {

// Similarity taking the points to centroid 0 and mean distance sqrt(2).
Eigen::Matrix3d normalizer(const Points2d& p) {
  const Eigen::RowVector2d c = p.colwise().mean();
  const double mean_dist = (p.rowwise() - c).rowwise().norm().mean();
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

Eigen::Matrix3d solve_dlt(const Points2d& src, const Points2d& dst) {
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  const auto n = src.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d s = ts * src.row(i).transpose().homogeneous();
    const Eigen::Vector3d d = td * dst.row(i).transpose().homogeneous();
    a.block<1, 3>(2 * i, 3) = -d.z() * s.transpose();
    a.block<1, 3>(2 * i, 6) = d.y() * s.transpose();
    a.block<1, 3>(2 * i + 1, 0) = d.z() * s.transpose();
    a.block<1, 3>(2 * i + 1, 6) = -d.x() * s.transpose();
  }
  Eigen::Matrix<double, 9, 9> ata = a.transpose() * a;
  Eigen::JacobiSVD<Eigen::Matrix<double, 9, 9>> svd(ata, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return td.inverse() * hn * ts;
}

bool collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a;
  const Eigen::Vector2d v = c - a;
  const double scale = std::max({u.squaredNorm(), v.squaredNorm(), 1e-300});
  return std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-9 * scale;
}

bool degenerate_sample(const Points2d& p, const std::array<Eigen::Index, 4>& idx) {
  for (int skip = 0; skip < 4; ++skip) {
    std::array<Eigen::Vector2d, 3> t;
    int k = 0;
    for (int i = 0; i < 4; ++i) {
      if (i != skip) t[static_cast<std::size_t>(k++)] = p.row(idx[static_cast<std::size_t>(i)]).transpose();
    }
    if (collinear(t[0], t[1], t[2])) return true;
  }
  return false;
}

// Uniform index in [0, n) by rejection, so the draw sequence depends only on
// the engine and not on the standard library's distribution code.
Eigen::Index uniform_index(std::mt19937_64& rng, Eigen::Index n) {
  const auto un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % un;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return static_cast<Eigen::Index>(r % un);
}

std::size_t score(const Homography& h, const Points2d& src, const Points2d& dst, double threshold,
                  std::vector<bool>& mask, double& total_error) {
  std::size_t count = 0;
  total_error = 0.0;
  mask.assign(static_cast<std::size_t>(src.rows()), false);
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const double e = symmetric_transfer_error(h, src.row(i).transpose(), dst.row(i).transpose());
    if (std::isfinite(e) && e < threshold) {
      mask[static_cast<std::size_t>(i)] = true;
      ++count;
      total_error += e;
    }
  }
  return count;
}

}  // namespace

Homography homography_dlt(const Points2d& src, const Points2d& dst) {
  if (src.rows() != dst.rows()) throw DimensionError("source and destination point counts differ");
  if (src.rows() < 4) throw Error("homography needs at least 4 correspondences");
  if (!src.allFinite() || !dst.allFinite()) throw InvariantError("correspondences must be finite");
  return Homography(solve_dlt(src, dst));
}

double symmetric_transfer_error(const Homography& h, const Eigen::Vector2d& src, const Eigen::Vector2d& dst) {
  const Eigen::Vector3d fwd = h.matrix() * src.homogeneous();
  const Eigen::Vector3d bwd = h.matrix().inverse() * dst.homogeneous();
  if (std::abs(fwd.z()) < 1e-12 || std::abs(bwd.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  return std::sqrt((fwd.hnormalized() - dst).squaredNorm() + (bwd.hnormalized() - src).squaredNorm());
}

void validate(const RansacConfig& cfg) {
  if (!(cfg.inlier_threshold > 0.0)) throw InvariantError("inlier_threshold must be > 0");
  if (cfg.max_iterations < 1) throw InvariantError("max_iterations must be >= 1");
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) throw InvariantError("confidence must lie in (0, 1)");
}

RansacResult estimate_homography(const Points2d& src, const Points2d& dst, const RansacConfig& cfg) {
  validate(cfg);
  if (src.rows() != dst.rows()) throw DimensionError("source and destination point counts differ");
  const Eigen::Index n = src.rows();
  if (n < 4) throw Error("homography needs at least 4 correspondences");
  if (!src.allFinite() || !dst.allFinite()) throw InvariantError("correspondences must be finite");

  std::mt19937_64 rng(cfg.seed);
  RansacResult best;
  double best_error = std::numeric_limits<double>::infinity();
  bool found = false;
  double budget = cfg.max_iterations;
  std::vector<bool> mask;
  Points2d s4(4, 2), d4(4, 2);

  int it = 0;
  while (it < cfg.max_iterations && it < budget) {
    ++it;
    std::array<Eigen::Index, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      Eigen::Index c = 0;
      do {
        c = uniform_index(rng, n);
      } while (std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), c) !=
               idx.begin() + static_cast<std::ptrdiff_t>(k));
      idx[k] = c;
    }
    if (degenerate_sample(src, idx) || degenerate_sample(dst, idx)) continue;
    for (int k = 0; k < 4; ++k) {
      s4.row(k) = src.row(idx[static_cast<std::size_t>(k)]);
      d4.row(k) = dst.row(idx[static_cast<std::size_t>(k)]);
    }
    Homography h;
    try {
      h = Homography(solve_dlt(s4, d4));
    } catch (const InvariantError&) {
      continue;
    }
    double err = 0.0;
    const std::size_t count = score(h, src, dst, cfg.inlier_threshold, mask, err);
    if (!found || count > best.inlier_count || (count == best.inlier_count && err < best_error)) {
      found = true;
      best.model = h;
      best.inliers = mask;
      best.inlier_count = count;
      best_error = err;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(w, 4.0);
      if (miss <= 0.0) {
        budget = 0.0;
      } else if (miss < 1.0) {
        budget = std::ceil(std::log(1.0 - cfg.confidence) / std::log(miss));
      }
    }
  }
  best.iterations = it;
  if (!found) throw Error("every RANSAC sample was degenerate (collinear points)");

  if (best.inlier_count >= 4) {
    Points2d si(static_cast<Eigen::Index>(best.inlier_count), 2), di(si.rows(), 2);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (best.inliers[static_cast<std::size_t>(i)]) {
        si.row(r) = src.row(i);
        di.row(r) = dst.row(i);
        ++r;
      }
    }
    try {
      const Homography refit(solve_dlt(si, di));
      double err = 0.0;
      std::vector<bool> refit_mask;
      const std::size_t count = score(refit, src, dst, cfg.inlier_threshold, refit_mask, err);
      if (count >= best.inlier_count) {
        best.model = refit;
        best.inliers = std::move(refit_mask);
        best.inlier_count = count;
      }
    } catch (const InvariantError&) {
      // keep the minimal-sample model
    }
  }
  return best;
}

WarpedPoints warp_points(const Homography& h, const Points2d& pts) {
  if (!pts.allFinite()) throw InvariantError("points must be finite");
  WarpedPoints out;
  out.points.resize(pts.rows(), 2);
  out.valid.resize(pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::Vector3d q = h.matrix() * pts.row(i).transpose().homogeneous();
    out.valid(i) = std::abs(q.z()) >= 1e-12;
    if (out.valid(i)) {
      out.points.row(i) = q.hnormalized().transpose();
    } else {
      out.points.row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

Raster warp_grid(const Homography& h, const Raster& grid, int out_width, int out_height) {
  if (grid.empty()) throw DimensionError("cannot warp an empty grid");
  Raster out(out_width, out_height, grid.channels);
  const Eigen::Matrix3d inv = h.matrix().inverse();
  const double xmax = grid.width - 1;
  const double ymax = grid.height - 1;
  constexpr double kSlack = 1e-9;
  for (int r = 0; r < out_height; ++r) {
    for (int c = 0; c < out_width; ++c) {
      const Eigen::Vector3d q = inv * Eigen::Vector3d(c, r, 1.0);
      if (std::abs(q.z()) < 1e-12) continue;
      double x = q.x() / q.z();
      double y = q.y() / q.z();
      if (!(x >= -kSlack && x <= xmax + kSlack && y >= -kSlack && y <= ymax + kSlack)) continue;
      x = std::clamp(x, 0.0, xmax);
      y = std::clamp(y, 0.0, ymax);
      const int x0 = std::min(static_cast<int>(std::floor(x)), grid.width - 1);
      const int y0 = std::min(static_cast<int>(std::floor(y)), grid.height - 1);
      const int x1 = std::min(x0 + 1, grid.width - 1);
      const int y1 = std::min(y0 + 1, grid.height - 1);
      const double fx = x - x0;
      const double fy = y - y0;
      for (int ch = 0; ch < grid.channels; ++ch) {
        const double top = (1.0 - fx) * grid.at(y0, x0, ch) + fx * grid.at(y0, x1, ch);
        const double bottom = (1.0 - fx) * grid.at(y1, x0, ch) + fx * grid.at(y1, x1, ch);
        out.at(r, c, ch) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

CropResult dorsal_crop(const Points2d& keypoints2d, const Raster& grid, const CropConfig& cfg) {
  if (cfg.size < 2) throw InvariantError("crop size must be at least 2");
  if (!(cfg.margin >= 0.0)) throw InvariantError("crop margin must be >= 0");
  if (cfg.dorsal_keypoints.empty()) throw InvariantError("no dorsal keypoints selected");
  if (grid.empty()) throw DimensionError("cannot crop an empty grid");
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (int k : cfg.dorsal_keypoints) {
    if (k < 0 || k >= keypoints2d.rows()) throw DimensionError("dorsal keypoint index out of range");
    const double x = keypoints2d(k, 0);
    const double y = keypoints2d(k, 1);
    if (!std::isfinite(x) || !std::isfinite(y)) throw InvariantError("dorsal keypoint is not finite");
    if (x < 0.0 || y < 0.0 || x > grid.width - 1 || y > grid.height - 1) {
      throw InvariantError("dorsal keypoint lies outside the image");
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (!(x1 > x0) || !(y1 > y0)) throw InvariantError("dorsal keypoint bounding box has zero extent");
  const double pad = cfg.margin * std::hypot(x1 - x0, y1 - y0);
  x0 -= pad;
  y0 -= pad;
  x1 += pad;
  y1 += pad;

  const double last = cfg.size - 1;
  CropResult out;
  out.box = {x0, y0, x1, y1};
  out.image_to_crop = Homography::scaling(last / (x1 - x0), last / (y1 - y0)) * Homography::translation(-x0, -y0);
  out.image = warp_grid(out.image_to_crop, grid, cfg.size, cfg.size);
  return out;
}

}  // namespace dorsal
