#include "dorsal/pipeline.hpp"

#include "dorsal/report_io.hpp"
#include "dorsal/rotation.hpp"
#include "dorsal/synthetic_hand.hpp"
#include "dorsal/template_io.hpp"
#include "dorsal/version.hpp"
#include "json_util.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace dorsal {

using detail::json;
using detail::ordered_json;

// ---------------------------------------------------------------- validation

void validate(const FrameAnnotation& frame) {
  if (frame.frame_id.empty()) throw InvariantError("frame_id must be non-empty");
  if (!frame.keypoints3d && !frame.markers3d && !frame.gt_state) {
    throw InvariantError("frame needs keypoints3d, markers3d or gt_state");
  }
  if (frame.skin_tone && (*frame.skin_tone < 1 || *frame.skin_tone > 10)) {
    throw InvariantError("skin_tone must lie in 1..10");
  }
}

void validate(const PipelineConfig& cfg) {
  validate(cfg.occlusion.raster);
  validate(cfg.fit);
  const auto& t = cfg.occlusion.thresholds;
  if (!(t.fully_occluded >= 0.0 && t.fully_occluded <= 1.0)) throw InvariantError("occlusion threshold must lie in [0, 1]");
  if (!(t.fully_visible >= 0.0 && t.fully_visible <= 1.0)) throw InvariantError("visibility threshold must lie in [0, 1]");
  if (!(t.fully_occluded < t.fully_visible)) throw InvariantError("occlusion threshold must be below the visibility threshold");
  if (!(t.finger_scale > 0.0 && t.finger_scale <= 1.0)) throw InvariantError("finger scale must lie in (0, 1]");
  if (!(cfg.low_visibility_cutoff >= 0.0 && cfg.low_visibility_cutoff <= 1.0)) {
    throw InvariantError("low visibility cutoff must lie in [0, 1]");
  }
  if (cfg.workers < 1) throw InvariantError("workers must be >= 1");
}

// ------------------------------------------------------------------ manifest

namespace {

double number_field(const json& obj, const char* key) {
  const json& v = detail::require(obj, key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

void apply_fit_overrides(const json& j, FitConfig& fit) {
  if (!j.is_object()) throw ParseError("config.fit must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "reg_pose_weight") fit.reg_pose_weight = number_field(j, "reg_pose_weight");
    else if (key == "reg_shape_weight") fit.reg_shape_weight = number_field(j, "reg_shape_weight");
    else if (key == "max_iterations") fit.max_iterations = static_cast<int>(number_field(j, "max_iterations"));
    else if (key == "step_tolerance") fit.step_tolerance = number_field(j, "step_tolerance");
    else if (key == "residual_tolerance") fit.residual_tolerance = number_field(j, "residual_tolerance");
    else if (key == "damping_init") fit.damping_init = number_field(j, "damping_init");
    else if (key == "fd_step") fit.fd_step = number_field(j, "fd_step");
    else if (key == "jacobian") {
      const std::string mode = value.is_string() ? value.get<std::string>() : "";
      if (mode == "analytic") fit.jacobian = JacobianMode::Analytic;
      else if (mode == "central_difference") fit.jacobian = JacobianMode::CentralDifference;
      else throw ParseError("config.fit.jacobian must be 'analytic' or 'central_difference'");
    } else {
      throw ParseError("unknown config.fit key '" + key + "'");
    }
  }
}

void apply_config_overrides(const json& j, PipelineConfig& cfg) {
  if (!j.is_object()) throw ParseError("config must be an object");
  auto& th = cfg.occlusion.thresholds;
  for (const auto& [key, value] : j.items()) {
    if (key == "raster") {
      cfg.occlusion.raster.width = cfg.occlusion.raster.height = static_cast<int>(number_field(j, "raster"));
    } else if (key == "depth_epsilon") {
      cfg.occlusion.raster.depth_epsilon = number_field(j, "depth_epsilon");
    } else if (key == "occl_threshold") {
      th.fully_occluded = number_field(j, "occl_threshold");
    } else if (key == "visible_threshold") {
      th.fully_visible = number_field(j, "visible_threshold");
    } else if (key == "finger_scale") {
      th.finger_scale = number_field(j, "finger_scale");
    } else if (key == "threshold_on_scaled") {
      if (!value.is_boolean()) throw ParseError("config.threshold_on_scaled must be a boolean");
      th.threshold_on_scaled = value.get<bool>();
    } else if (key == "low_visibility_cutoff") {
      cfg.low_visibility_cutoff = number_field(j, "low_visibility_cutoff");
    } else if (key == "angular_error") {
      const std::string mode = value.is_string() ? value.get<std::string>() : "";
      if (mode == "geodesic") cfg.angular_error = AngularError::Geodesic;
      else if (mode == "per_axis_euler") cfg.angular_error = AngularError::PerAxisEuler;
      else throw ParseError("config.angular_error must be 'geodesic' or 'per_axis_euler'");
    } else if (key == "fit") {
      apply_fit_overrides(value, cfg.fit);
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
}

ordered_json config_to_json(const PipelineConfig& cfg) {
  const auto& th = cfg.occlusion.thresholds;
  ordered_json fit;
  fit["reg_pose_weight"] = cfg.fit.reg_pose_weight;
  fit["reg_shape_weight"] = cfg.fit.reg_shape_weight;
  fit["max_iterations"] = cfg.fit.max_iterations;
  fit["step_tolerance"] = cfg.fit.step_tolerance;
  fit["residual_tolerance"] = cfg.fit.residual_tolerance;
  fit["damping_init"] = cfg.fit.damping_init;
  fit["fd_step"] = cfg.fit.fd_step;
  fit["jacobian"] = cfg.fit.jacobian == JacobianMode::Analytic ? "analytic" : "central_difference";
  ordered_json j;
  j["raster"] = cfg.occlusion.raster.width;
  if (cfg.occlusion.raster.height != cfg.occlusion.raster.width) j["raster_height"] = cfg.occlusion.raster.height;
  j["depth_epsilon"] = cfg.occlusion.raster.depth_epsilon;
  j["occl_threshold"] = th.fully_occluded;
  j["visible_threshold"] = th.fully_visible;
  j["finger_scale"] = th.finger_scale;
  j["threshold_on_scaled"] = th.threshold_on_scaled;
  j["low_visibility_cutoff"] = cfg.low_visibility_cutoff;
  j["angular_error"] = cfg.angular_error == AngularError::Geodesic ? "geodesic" : "per_axis_euler";
  j["fit"] = std::move(fit);
  return j;
}

std::string path_string(const json& v, const char* what) {
  if (!v.is_string() || v.get<std::string>().empty()) throw ParseError(std::string(what) + " must be a non-empty string");
  return v.get<std::string>();
}

}  // namespace

std::filesystem::path RunManifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

RunManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  detail::require_schema(doc, kManifestSchema);
  RunManifest m;
  m.base_dir = base_dir;
  for (const auto& [key, value] : doc.items()) {
    if (key == "schema") continue;
    if (key == "template") {
      m.template_ref = path_string(value, "template");
    } else if (key == "calibration") {
      m.calibration = path_string(value, "calibration");
    } else if (key == "annotations") {
      if (!value.is_array()) throw ParseError("annotations must be an array of paths");
      for (const auto& a : value) m.annotations.emplace_back(path_string(a, "annotation path"));
    } else if (key == "predictions") {
      m.predictions = path_string(value, "predictions");
    } else if (key == "output_dir") {
      m.output_dir = path_string(value, "output_dir");
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ParseError("seed must be a non-negative integer");
      m.seed = value.get<std::uint64_t>();
    } else if (key == "config") {
      apply_config_overrides(value, m.config);
    } else {
      throw ParseError("unknown manifest key '" + key + "'");
    }
  }
  if (m.calibration.empty()) throw ParseError("missing field 'calibration'");
  if (m.annotations.empty()) throw ParseError("manifest lists no annotation files");
  validate(m.config);
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_text_file(path), path.parent_path());
}

std::string serialize_manifest(const RunManifest& m) {
  ordered_json j;
  j["schema"] = kManifestSchema;
  j["template"] = m.template_ref;
  j["calibration"] = m.calibration.generic_string();
  j["annotations"] = ordered_json::array();
  for (const auto& a : m.annotations) j["annotations"].push_back(a.generic_string());
  if (m.predictions) j["predictions"] = m.predictions->generic_string();
  if (!m.output_dir.empty()) j["output_dir"] = m.output_dir.generic_string();
  j["seed"] = m.seed;
  j["config"] = config_to_json(m.config);
  return j.dump(2) + "\n";
}

void check_inputs_exist(const RunManifest& m) {
  auto need = [&](const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(m.resolve(p))) throw Error("input file not found: " + m.resolve(p).string());
  };
  if (m.template_ref != kBuiltinTemplate) need(m.template_ref);
  need(m.calibration);
  for (const auto& a : m.annotations) need(a);
  if (m.predictions) need(*m.predictions);
}

RiggedHandTemplate load_template_ref(const RunManifest& m) {
  if (m.template_ref == kBuiltinTemplate) return make_synthetic_hand();
  return load_template(m.resolve(m.template_ref));
}

// --------------------------------------------------------------- annotations

namespace {

HandState state_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("state must be an object");
  HandState s;
  const auto pose = detail::read_rows<double>(detail::require(j, "pose"), "pose", 3);
  if (pose.rows() != kNumArticulated) throw ParseError("pose must have 15 rows");
  s.pose = pose;
  s.shape = j.contains("shape") ? detail::read_vector(j.at("shape"), "shape") : Eigen::VectorXd();
  if (j.contains("global_orient")) {
    const auto v = detail::read_vector(j.at("global_orient"), "global_orient");
    if (v.size() != 3) throw ParseError("global_orient must have 3 entries");
    s.global_orient = v;
  }
  if (j.contains("translation")) {
    const auto v = detail::read_vector(j.at("translation"), "translation");
    if (v.size() != 3) throw ParseError("translation must have 3 entries");
    s.translation = v;
  }
  if (!s.is_finite()) throw ParseError("state has non-finite values");
  return s;
}

ordered_json state_to_json(const HandState& s) {
  ordered_json j;
  j["pose"] = detail::write_rows(s.pose);
  j["shape"] = detail::write_vector(s.shape);
  j["global_orient"] = detail::write_vector(s.global_orient);
  j["translation"] = detail::write_vector(s.translation);
  return j;
}

KeypointTargets keypoints_from_json(const json& arr, const json* confidence) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(kNumKeypoints)) {
    throw ParseError("keypoints3d must hold 21 entries");
  }
  KeypointTargets t;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const json& p = arr[static_cast<std::size_t>(k)];
    if (p.is_null()) {
      t.points.row(k).setZero();
      t.confidence(k) = 0.0;
      continue;
    }
    if (!p.is_array() || p.size() != 3) throw ParseError("keypoint entries must be [x, y, z] or null");
    for (int c = 0; c < 3; ++c) {
      if (!p[static_cast<std::size_t>(c)].is_number()) throw ParseError("keypoint coordinates must be numbers");
      t.points(k, c) = p[static_cast<std::size_t>(c)].get<double>();
    }
    if (!t.points.row(k).allFinite()) throw ParseError("keypoint coordinates must be finite");
  }
  if (confidence) {
    const Eigen::VectorXd c = detail::read_vector(*confidence, "keypoint_confidence");
    if (c.size() != kNumKeypoints) throw ParseError("keypoint_confidence must hold 21 entries");
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any()) throw ParseError("keypoint_confidence must lie in [0, 1]");
    t.confidence = t.confidence.cwiseMin(c);
  }
  return t;
}

MarkerTargets markers_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("markers3d must be an object");
  MarkerTargets m;
  m.points = detail::read_rows<double>(detail::require(j, "points"), "markers3d.points", 3);
  const json& ids = detail::require(j, "vertex_ids");
  if (!ids.is_array()) throw ParseError("markers3d.vertex_ids must be an array");
  for (const auto& id : ids) {
    if (!id.is_number_integer()) throw ParseError("marker vertex ids must be integers");
    m.vertex_ids.push_back(id.get<int>());
  }
  if (static_cast<Eigen::Index>(m.vertex_ids.size()) != m.points.rows()) {
    throw ParseError("markers3d points and vertex_ids differ in count");
  }
  if (j.contains("confidence")) m.confidence = detail::read_vector(j.at("confidence"), "markers3d.confidence");
  if (!m.points.allFinite()) throw ParseError("marker coordinates must be finite");
  return m;
}

std::string string_field(const json& doc, const char* key, bool required) {
  if (!doc.contains(key)) {
    if (required) throw ParseError(std::string("missing field '") + key + "'");
    return {};
  }
  const json& v = doc.at(key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

FrameAnnotation frame_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("frame line must be a JSON object");
  FrameAnnotation f;
  f.frame_id = string_field(doc, "frame_id", true);
  f.subject_id = string_field(doc, "subject_id", false);
  f.gesture = string_field(doc, "gesture", false);
  if (doc.contains("skin_tone")) {
    if (!doc.at("skin_tone").is_number_integer()) throw ParseError("skin_tone must be an integer");
    f.skin_tone = doc.at("skin_tone").get<int>();
  }
  if (doc.contains("keypoints3d")) {
    f.keypoints3d = keypoints_from_json(doc.at("keypoints3d"),
                                        doc.contains("keypoint_confidence") ? &doc.at("keypoint_confidence") : nullptr);
  }
  if (doc.contains("markers3d")) f.markers3d = markers_from_json(doc.at("markers3d"));
  if (doc.contains("gt_state")) f.gt_state = state_from_json(doc.at("gt_state"));
  try {
    validate(f);
  } catch (const InvariantError& e) {
    throw ParseError(e.what());
  }
  return f;
}

ordered_json frame_to_json(const FrameAnnotation& f) {
  ordered_json j;
  j["frame_id"] = f.frame_id;
  if (!f.subject_id.empty()) j["subject_id"] = f.subject_id;
  if (!f.gesture.empty()) j["gesture"] = f.gesture;
  if (f.skin_tone) j["skin_tone"] = *f.skin_tone;
  if (f.keypoints3d) {
    ordered_json kp = ordered_json::array();
    for (int k = 0; k < kNumKeypoints; ++k) {
      if (f.keypoints3d->confidence(k) == 0.0) {
        kp.push_back(nullptr);
      } else {
        kp.push_back(ordered_json(detail::write_vector(f.keypoints3d->points.row(k))));
      }
    }
    j["keypoints3d"] = std::move(kp);
    if ((f.keypoints3d->confidence.array() != 0.0 && f.keypoints3d->confidence.array() != 1.0).any()) {
      j["keypoint_confidence"] = detail::write_vector(f.keypoints3d->confidence);
    }
  }
  if (f.markers3d) {
    ordered_json m;
    m["points"] = detail::write_rows(f.markers3d->points);
    m["vertex_ids"] = f.markers3d->vertex_ids;
    if (f.markers3d->confidence.size() > 0) m["confidence"] = detail::write_vector(f.markers3d->confidence);
    j["markers3d"] = std::move(m);
  }
  if (f.gt_state) j["gt_state"] = state_to_json(*f.gt_state);
  return j;
}

// Calls fn(line_number, line) for each non-blank line after the schema line.
// Returns false when the document has no non-blank line at all.
template <typename Fn>
bool for_each_record(std::string_view text, std::string_view schema, std::string_view source, Fn&& fn) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header) {
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::exception&) {
        throw ParseError(std::string(source) + ": first line must be the schema record");
      }
      detail::require_schema(doc, schema);
      header = true;
      continue;
    }
    fn(lineno, line);
  }
  return header;
}

std::string problem(std::string_view source, std::size_t lineno, std::string_view what) {
  return std::string(source) + ":" + std::to_string(lineno) + ": " + std::string(what);
}

}  // namespace

void parse_annotations(std::string_view text, std::string_view source, IngestResult& into) {
  std::set<std::string> seen;
  for (const auto& f : into.frames) seen.insert(f.frame_id);
  const bool any = for_each_record(text, kAnnotationSchema, source, [&](std::size_t lineno, const std::string& line) {
    try {
      FrameAnnotation f = frame_from_json(json::parse(line));
      if (!seen.insert(f.frame_id).second) throw ParseError("duplicate frame_id '" + f.frame_id + "'");
      into.frames.push_back(std::move(f));
    } catch (const json::exception& e) {
      ++into.malformed;
      into.problems.push_back(problem(source, lineno, std::string("invalid JSON: ") + e.what()));
    } catch (const Error& e) {
      ++into.malformed;
      into.problems.push_back(problem(source, lineno, e.what()));
    }
  });
  if (!any) warn("annotation source '" + std::string(source) + "' is empty; no frames read");
}

IngestResult ingest(const RunManifest& manifest) {
  IngestResult out;
  for (const auto& a : manifest.annotations) {
    parse_annotations(detail::read_text_file(manifest.resolve(a)), a.generic_string(), out);
  }
  for (const auto& p : out.problems) warn("skipped frame: " + p);
  return out;
}

std::string serialize_annotations(std::span<const FrameAnnotation> frames) {
  std::string out = ordered_json{{"schema", kAnnotationSchema}}.dump() + "\n";
  for (const auto& f : frames) out += frame_to_json(f).dump() + "\n";
  return out;
}

PredictionSet parse_predictions(std::string_view text, std::string_view source) {
  PredictionSet out;
  for_each_record(text, kPredictionSchema, source, [&](std::size_t lineno, const std::string& line) {
    try {
      const json doc = json::parse(line);
      Prediction p;
      p.frame_id = string_field(doc, "frame_id", true);
      if (p.frame_id.empty()) throw ParseError("frame_id must be non-empty");
      p.state = state_from_json(detail::require(doc, "state"));
      out.items.push_back(std::move(p));
    } catch (const json::exception& e) {
      ++out.malformed;
      out.problems.push_back(problem(source, lineno, std::string("invalid JSON: ") + e.what()));
    } catch (const Error& e) {
      ++out.malformed;
      out.problems.push_back(problem(source, lineno, e.what()));
    }
  });
  return out;
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  return parse_predictions(detail::read_text_file(path), path.filename().generic_string());
}

std::string serialize_predictions(std::span<const Prediction> predictions) {
  std::string out = ordered_json{{"schema", kPredictionSchema}}.dump() + "\n";
  for (const auto& p : predictions) {
    ordered_json j;
    j["frame_id"] = p.frame_id;
    j["state"] = state_to_json(p.state);
    out += j.dump() + "\n";
  }
  return out;
}

// ------------------------------------------------------------------ workers

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::min(threads, n));
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// -------------------------------------------------------------------- audit

std::string_view state_source_name(StateSource s) {
  switch (s) {
    case StateSource::GroundTruth: return "gt_state";
    case StateSource::KeypointFit: return "keypoint_fit";
    case StateSource::MarkerFit: return "marker_fit";
  }
  return "unknown";
}

HandState rigid_initialization(const RiggedHandTemplate& tmpl, const Points3d& rest_points, const Points3d& observed,
                               const Eigen::VectorXd& weights) {
  HandState s = HandState::neutral(tmpl.shape_rank());
  std::vector<Eigen::Index> use;
  for (Eigen::Index i = 0; i < observed.rows(); ++i) {
    if (weights(i) > 0.0 && observed.row(i).allFinite()) use.push_back(i);
  }
  if (use.empty()) return s;
  Eigen::RowVector3d ma = Eigen::RowVector3d::Zero();
  Eigen::RowVector3d mb = Eigen::RowVector3d::Zero();
  double wsum = 0.0;
  for (auto i : use) {
    ma += weights(i) * rest_points.row(i);
    mb += weights(i) * observed.row(i);
    wsum += weights(i);
  }
  ma /= wsum;
  mb /= wsum;
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  if (use.size() >= 3) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (auto i : use) cov += weights(i) * (observed.row(i) - mb).transpose() * (rest_points.row(i) - ma);
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(1) > 1e-9 * sv(0)) {
      Eigen::Vector3d d = Eigen::Vector3d::Ones();
      if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2) = -1.0;
      r = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
    }
  }
  // Posing with zero pose maps x to R (x - J0) + J0 + t.
  const Eigen::Vector3d j0 = tmpl.rest_joints.row(0).transpose();
  const Eigen::Vector3d c = mb.transpose() - r * ma.transpose();
  s.global_orient = matrix_to_axis_angle(r);
  s.translation = c + r * j0 - j0;
  return s;
}

namespace {

HandState padded_state(const RiggedHandTemplate& tmpl, HandState s) {
  if (s.shape.size() > tmpl.shape_rank()) throw DimensionError("state has more shape coefficients than the template");
  if (s.shape.size() < tmpl.shape_rank()) {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(tmpl.shape_rank());
    full.head(s.shape.size()) = s.shape;
    s.shape = full;
  }
  return s;
}

void audit_frame(const RiggedHandTemplate& tmpl, const CameraRig& rig, const FrameAnnotation& ann,
                 const PipelineConfig& cfg, FrameAudit& out) {
  out.frame_id = ann.frame_id;
  out.subject_id = ann.subject_id;
  out.gesture = ann.gesture;
  out.skin_tone = ann.skin_tone;
  try {
    if (ann.gt_state) {
      out.source = StateSource::GroundTruth;
      out.state = padded_state(tmpl, *ann.gt_state);
    } else if (ann.keypoints3d) {
      out.source = StateSource::KeypointFit;
      const Points3d rest = pose_mesh(tmpl, HandState::neutral(tmpl.shape_rank())).keypoints21;
      const HandState init = rigid_initialization(tmpl, rest, ann.keypoints3d->points, ann.keypoints3d->confidence);
      out.fit = fit(tmpl, *ann.keypoints3d, init, cfg.fit);
      out.state = out.fit->state;
    } else {
      out.source = StateSource::MarkerFit;
      const auto& mk = *ann.markers3d;
      const Points3d rest_vertices = pose_mesh(tmpl, HandState::neutral(tmpl.shape_rank())).vertices;
      Points3d rest(static_cast<Eigen::Index>(mk.vertex_ids.size()), 3);
      for (std::size_t m = 0; m < mk.vertex_ids.size(); ++m) {
        const int id = mk.vertex_ids[m];
        if (id < 0 || id >= tmpl.num_vertices()) throw DimensionError("vertex_id out of range: " + std::to_string(id));
        rest.row(static_cast<Eigen::Index>(m)) = rest_vertices.row(id);
      }
      const Eigen::VectorXd w = mk.confidence.size() ? mk.confidence : Eigen::VectorXd::Ones(rest.rows());
      const HandState init = rigid_initialization(tmpl, rest, mk.points, w);
      out.fit = fit(tmpl, mk, init, cfg.fit);
      out.state = out.fit->state;
    }
    const HandMesh mesh = pose_mesh(tmpl, out.state);
    out.visibility = visibility_report(mesh, tmpl, rig, cfg.occlusion);
    if (out.fit && !out.fit->converged) out.visibility.warnings.push_back("pose fit did not converge");
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
}

}  // namespace

AuditResult run_occlusion_audit(const RiggedHandTemplate& tmpl, const CameraRig& rig, const IngestResult& ingested,
                                const PipelineConfig& cfg) {
  validate(cfg);
  validate(rig);
  AuditResult res;
  res.malformed = ingested.malformed;
  res.ingest_problems = ingested.problems;
  res.frames.resize(ingested.frames.size());
  parallel_for(ingested.frames.size(), cfg.workers,
               [&](std::size_t i) { audit_frame(tmpl, rig, ingested.frames[i], cfg, res.frames[i]); });

  std::vector<VisibilityReport> ok;
  for (const auto& f : res.frames) {
    if (f.ok) {
      ok.push_back(f.visibility);
    } else {
      ++res.failed;
    }
  }
  if (!ok.empty()) res.aggregate = dataset_occlusion_stats(ok);
  return res;
}

// ------------------------------------------------------------- metric join

MetricJoinResult run_metric_join(const RiggedHandTemplate& tmpl, const AuditResult& audit,
                                 const PredictionSet& predictions, const PipelineConfig& cfg) {
  validate(cfg);
  MetricJoinResult res;
  for (int j = 0; j < kNumArticulated; ++j) {
    res.joint_names[static_cast<std::size_t>(j)] = tmpl.joint_names[static_cast<std::size_t>(j + 1)];
  }
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < audit.frames.size(); ++i) by_id.emplace(audit.frames[i].frame_id, i);

  struct Job {
    const Prediction* pred;
    const FrameAudit* frame;
  };
  std::vector<Job> jobs;
  std::set<std::string> predicted;
  for (const auto& p : predictions.items) {
    if (!predicted.insert(p.frame_id).second) {
      res.unmatched.push_back({p.frame_id, "duplicate prediction"});
      continue;
    }
    const auto it = by_id.find(p.frame_id);
    if (it == by_id.end()) {
      res.unmatched.push_back({p.frame_id, "no annotated frame"});
      continue;
    }
    const FrameAudit& fa = audit.frames[it->second];
    if (!fa.ok) {
      res.unmatched.push_back({p.frame_id, "reference frame failed: " + fa.error});
      continue;
    }
    jobs.push_back({&p, &fa});
  }
  for (const auto& fa : audit.frames) {
    if (!predicted.count(fa.frame_id)) res.unmatched.push_back({fa.frame_id, "no prediction"});
  }

  std::vector<std::optional<FrameMetrics>> computed(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      PosePair pair{padded_state(tmpl, job.pred->state), job.frame->state, std::nullopt, std::nullopt};
      FrameMetrics fm;
      fm.frame_id = job.frame->frame_id;
      fm.subject_id = job.frame->subject_id;
      fm.gesture = job.frame->gesture;
      fm.skin_tone = job.frame->skin_tone;
      fm.reference = job.frame->source;
      fm.mean_finger_visibility = job.frame->visibility.mean_finger_visibility;
      fm.low_visibility = fm.mean_finger_visibility <= cfg.low_visibility_cutoff;
      fm.metrics = frame_metrics(tmpl, pair, cfg.angular_error);
      computed[i] = std::move(fm);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (computed[i]) {
      res.frames.push_back(std::move(*computed[i]));
    } else {
      res.unmatched.push_back({jobs[i].pred->frame_id, "metric failed: " + errors[i]});
    }
  }

  if (res.frames.size() >= 2) {
    std::vector<double> x, y;
    for (const auto& f : res.frames) {
      x.push_back(f.mean_finger_visibility);
      y.push_back(f.metrics.mpjae.mean_deg);
    }
    try {
      res.regression = linear_regression(x, y);
    } catch (const Error& e) {
      res.notes.push_back(std::string("regression omitted: ") + e.what());
    }
  } else {
    res.notes.push_back("regression omitted: fewer than 2 matched frames");
  }

  std::map<int, std::vector<double>> tones;
  for (const auto& f : res.frames) {
    if (f.skin_tone) tones[*f.skin_tone].push_back(f.metrics.mpjae.mean_deg);
  }
  if (tones.size() >= 2) {
    std::vector<std::vector<double>> groups;
    for (auto& [tone, values] : tones) groups.push_back(std::move(values));
    try {
      res.skin_tone_anova = one_way_anova(groups);
    } catch (const Error& e) {
      res.notes.push_back(std::string("skin tone ANOVA omitted: ") + e.what());
    }
  } else {
    res.notes.push_back("skin tone ANOVA omitted: fewer than 2 skin tone groups");
  }
  return res;
}

// ------------------------------------------------------------------ reports

namespace {

std::string fmt(double v) { return format_number(v); }

std::vector<std::string> threshold_comments(const PipelineConfig& cfg) {
  const auto& th = cfg.occlusion.thresholds;
  return {
      "fully_occluded_threshold=" + fmt(th.fully_occluded) + " (finger visibility <= threshold)",
      "fully_visible_threshold=" + fmt(th.fully_visible) + " (finger visibility > threshold)",
      "finger_visibility_scale=" + fmt(th.finger_scale) + " (finger fraction / scale, clamped to 1)",
      std::string("thresholds_applied_to=") + (th.threshold_on_scaled ? "scaled" : "raw"),
      "raster=" + std::to_string(cfg.occlusion.raster.width) + "x" + std::to_string(cfg.occlusion.raster.height),
      "low_visibility_cutoff=" + fmt(cfg.low_visibility_cutoff) + " (mean finger visibility <= cutoff)",
  };
}

std::string finger_list(const std::array<bool, kNumFingers>& flags) {
  std::string out;
  for (Part p : kFingers) {
    if (!flags[static_cast<std::size_t>(index_of(p))]) continue;
    if (!out.empty()) out += ";";
    out += part_name(p);
  }
  return out.empty() ? "-" : out;
}

ordered_json percentile_json(const PercentileSummary& p) {
  ordered_json j;
  j["min"] = p.min;
  j["p25"] = p.p25;
  j["median"] = p.median;
  j["p75"] = p.p75;
  j["max"] = p.max;
  return j;
}

ordered_json thresholds_json(const PipelineConfig& cfg) {
  const auto& th = cfg.occlusion.thresholds;
  ordered_json j;
  j["fully_occluded"] = th.fully_occluded;
  j["fully_visible"] = th.fully_visible;
  j["finger_scale"] = th.finger_scale;
  j["threshold_on_scaled"] = th.threshold_on_scaled;
  j["raster"] = {cfg.occlusion.raster.width, cfg.occlusion.raster.height};
  j["low_visibility_cutoff"] = cfg.low_visibility_cutoff;
  return j;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
  detail::write_text_file(path, j.dump(2) + "\n");
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Per-subject means, then mean and sample SD across subjects.
MeanSd across_subjects(const std::vector<const FrameMetrics*>& rows, const std::function<double(const FrameMetrics&)>& get) {
  std::map<std::string, std::vector<double>> per_subject;
  for (const auto* r : rows) per_subject[r->subject_id].push_back(get(*r));
  std::vector<double> means;
  for (const auto& [subject, values] : per_subject) means.push_back(mean_sd(values).mean);
  return mean_sd(means);
}

std::size_t subject_count(const std::vector<const FrameMetrics*>& rows) {
  std::set<std::string> s;
  for (const auto* r : rows) s.insert(r->subject_id);
  return s.size();
}

}  // namespace

std::vector<std::string> write_audit_reports(const AuditResult& audit, const PipelineConfig& cfg,
                                             const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;

  std::vector<std::string> cols = {"frame_id", "subject_id", "gesture", "state_source"};
  for (Part p : kAllParts) cols.emplace_back(part_name(p));
  for (const char* c : {"mean_finger_visibility", "occluded_fingers", "visible_fingers", "fully_occluded",
                        "fully_visible", "fit_objective", "fit_iterations", "fit_converged"}) {
    cols.emplace_back(c);
  }
  CsvTable vis(cols, threshold_comments(cfg));
  for (const auto& f : audit.frames) {
    if (!f.ok) continue;
    std::vector<std::string> row = {f.frame_id, f.subject_id, f.gesture, std::string(state_source_name(f.source))};
    for (Part p : kAllParts) row.push_back(fmt(f.visibility.visibility(p)));
    row.push_back(fmt(f.visibility.mean_finger_visibility));
    row.push_back(std::to_string(f.visibility.occluded_finger_count()));
    row.push_back(std::to_string(f.visibility.visible_finger_count()));
    row.push_back(finger_list(f.visibility.fully_occluded));
    row.push_back(finger_list(f.visibility.fully_visible));
    row.push_back(f.fit ? fmt(f.fit->final_objective) : "");
    row.push_back(f.fit ? std::to_string(f.fit->iterations) : "");
    row.push_back(f.fit ? (f.fit->converged ? "1" : "0") : "");
    vis.add_row(std::move(row));
  }
  vis.write(out_dir / "visibility.csv");
  files.emplace_back("visibility.csv");

  CsvTable issues({"item", "kind", "message"});
  for (const auto& p : audit.ingest_problems) issues.add_row({p.substr(0, p.find(": ")), "skipped", p.substr(p.find(": ") + 2)});
  for (const auto& f : audit.frames) {
    if (!f.ok) issues.add_row({f.frame_id, "failed", f.error});
    for (const auto& w : f.visibility.warnings) issues.add_row({f.frame_id, "warning", w});
  }
  issues.write(out_dir / "frame_issues.csv");
  files.emplace_back("frame_issues.csv");

  ordered_json summary;
  summary["schema"] = "dorsal.occlusion_summary/1";
  summary["thresholds"] = thresholds_json(cfg);
  summary["frames_ok"] = audit.frames.size() - audit.failed;
  summary["frames_failed"] = audit.failed;
  summary["lines_skipped"] = audit.malformed;
  if (audit.aggregate) {
    const auto& a = *audit.aggregate;
    summary["visible_finger_histogram"] = a.visible_finger_histogram;
    summary["occluded_finger_histogram"] = a.occluded_finger_histogram;
    summary["occluded_frame_fraction"] = a.occluded_frame_fraction;
    summary["dorsal_visibility_when_occluded"] =
        a.dorsal_when_occluded ? percentile_json(*a.dorsal_when_occluded) : ordered_json(nullptr);
  }
  write_json(out_dir / "occlusion_summary.json", summary);
  files.emplace_back("occlusion_summary.json");
  return files;
}

std::vector<std::string> write_metric_reports(const MetricJoinResult& join, const PipelineConfig& cfg,
                                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> files;
  const auto comments = threshold_comments(cfg);
  const std::string mode =
      std::string("angular_error=") + (cfg.angular_error == AngularError::Geodesic ? "geodesic" : "per_axis_euler");
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> c = comments;
    c.push_back(mode);
    for (auto& e : extra) c.push_back(std::move(e));
    return c;
  };

  CsvTable per_frame({"frame_id", "subject_id", "gesture", "reference", "mean_finger_visibility", "low_visibility",
                      "mpjae_deg", "pa_mpjpe_mm"},
                     with({}));
  for (const auto& f : join.frames) {
    per_frame.add_row({f.frame_id, f.subject_id, f.gesture, std::string(state_source_name(f.reference)),
                       fmt(f.mean_finger_visibility), f.low_visibility ? "1" : "0", fmt(f.metrics.mpjae.mean_deg),
                       fmt(f.metrics.pa_mpjpe_mm)});
  }
  per_frame.write(out_dir / "metrics_per_frame.csv");
  files.emplace_back("metrics_per_frame.csv");

  std::vector<const FrameMetrics*> all, low;
  for (const auto& f : join.frames) {
    all.push_back(&f);
    if (f.low_visibility) low.push_back(&f);
  }

  const std::vector<std::string> stats_note = {"values are mean and SD across subjects of per-subject means"};
  CsvTable summary({"subset", "frames", "subjects", "mpjae_mean_deg", "mpjae_sd_deg", "pa_mpjpe_mean_mm",
                    "pa_mpjpe_sd_mm"},
                   with(stats_note));
  auto summary_row = [&](const std::string& name, const std::vector<const FrameMetrics*>& rows) {
    if (rows.empty()) {
      summary.add_row({name, "0", "0", "", "", "", ""});
      return;
    }
    const MeanSd a = across_subjects(rows, [](const FrameMetrics& m) { return m.metrics.mpjae.mean_deg; });
    const MeanSd p = across_subjects(rows, [](const FrameMetrics& m) { return m.metrics.pa_mpjpe_mm; });
    summary.add_row({name, std::to_string(rows.size()), std::to_string(subject_count(rows)), fmt(a.mean), fmt(a.sd),
                     fmt(p.mean), fmt(p.sd)});
  };
  summary_row("all", all);
  summary_row("low_visibility", low);
  summary.write(out_dir / "metrics_summary.csv");
  files.emplace_back("metrics_summary.csv");

  CsvTable per_gesture({"gesture", "frames", "subjects", "mpjae_mean_deg", "mpjae_sd_deg", "pa_mpjpe_mean_mm",
                        "pa_mpjpe_sd_mm", "low_visibility_frames", "low_visibility_mpjae_mean_deg",
                        "low_visibility_mpjae_sd_deg"},
                       with(stats_note));
  std::map<std::string, std::vector<const FrameMetrics*>> gestures;
  for (const auto* f : all) gestures[f->gesture].push_back(f);
  for (const auto& [gesture, rows] : gestures) {
    std::vector<const FrameMetrics*> lows;
    for (const auto* r : rows) {
      if (r->low_visibility) lows.push_back(r);
    }
    const MeanSd a = across_subjects(rows, [](const FrameMetrics& m) { return m.metrics.mpjae.mean_deg; });
    const MeanSd p = across_subjects(rows, [](const FrameMetrics& m) { return m.metrics.pa_mpjpe_mm; });
    std::vector<std::string> row = {gesture, std::to_string(rows.size()), std::to_string(subject_count(rows)),
                                    fmt(a.mean), fmt(a.sd), fmt(p.mean), fmt(p.sd), std::to_string(lows.size())};
    if (lows.empty()) {
      row.insert(row.end(), {"", ""});
    } else {
      const MeanSd l = across_subjects(lows, [](const FrameMetrics& m) { return m.metrics.mpjae.mean_deg; });
      row.insert(row.end(), {fmt(l.mean), fmt(l.sd)});
    }
    per_gesture.add_row(std::move(row));
  }
  per_gesture.write(out_dir / "metrics_per_gesture.csv");
  files.emplace_back("metrics_per_gesture.csv");

  CsvTable per_joint({"joint", "mpjae_mean_deg", "mpjae_sd_deg", "low_visibility_mpjae_mean_deg",
                      "low_visibility_mpjae_sd_deg"},
                     with(stats_note));
  for (int j = 0; j < kNumArticulated; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    auto get = [ju](const FrameMetrics& m) { return m.metrics.mpjae.per_joint_deg[ju]; };
    std::vector<std::string> row = {join.joint_names[ju]};
    if (all.empty()) {
      row.insert(row.end(), {"", ""});
    } else {
      const MeanSd a = across_subjects(all, get);
      row.insert(row.end(), {fmt(a.mean), fmt(a.sd)});
    }
    if (low.empty()) {
      row.insert(row.end(), {"", ""});
    } else {
      const MeanSd l = across_subjects(low, get);
      row.insert(row.end(), {fmt(l.mean), fmt(l.sd)});
    }
    per_joint.add_row(std::move(row));
  }
  per_joint.write(out_dir / "metrics_per_joint.csv");
  files.emplace_back("metrics_per_joint.csv");

  CsvTable scatter({"frame_id", "mean_finger_visibility", "mpjae_deg"}, with({}));
  for (const auto* f : all) scatter.add_row({f->frame_id, fmt(f->mean_finger_visibility), fmt(f->metrics.mpjae.mean_deg)});
  scatter.write(out_dir / "visibility_vs_mpjae.csv");
  files.emplace_back("visibility_vs_mpjae.csv");

  CsvTable unmatched({"frame_id", "reason"});
  for (const auto& u : join.unmatched) unmatched.add_row({u.frame_id, u.reason});
  unmatched.write(out_dir / "unmatched.csv");
  files.emplace_back("unmatched.csv");

  ordered_json analysis;
  analysis["schema"] = "dorsal.analysis/1";
  analysis["thresholds"] = thresholds_json(cfg);
  analysis["matched_frames"] = join.frames.size();
  analysis["low_visibility_frames"] = low.size();
  if (join.regression) {
    ordered_json r;
    r["x"] = "mean_finger_visibility";
    r["y"] = "mpjae_deg";
    r["slope"] = join.regression->slope;
    r["intercept"] = join.regression->intercept;
    r["r_squared"] = join.regression->r_squared;
    r["n"] = join.regression->n;
    analysis["regression"] = std::move(r);
  } else {
    analysis["regression"] = nullptr;
  }
  if (join.skin_tone_anova) {
    const auto& a = *join.skin_tone_anova;
    ordered_json r;
    r["y"] = "mpjae_deg";
    r["groups"] = a.groups;
    r["n"] = a.n;
    r["ss_between"] = a.ss_between;
    r["ss_within"] = a.ss_within;
    r["ss_total"] = a.ss_total;
    r["f_statistic"] = finite_or_null(a.f_statistic);
    r["eta_squared"] = a.eta_squared;
    analysis["skin_tone_anova"] = std::move(r);
  } else {
    analysis["skin_tone_anova"] = nullptr;
  }
  analysis["notes"] = join.notes;
  write_json(out_dir / "analysis.json", analysis);
  files.emplace_back("analysis.json");
  return files;
}

void write_run_summary(const RunSummary& s, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ordered_json j;
  j["schema"] = kRunSummarySchema;
  j["tool_version"] = kVersion;
  j["command"] = s.command;
  j["seed"] = s.seed;
  j["template"] = s.template_ref;
  j["config"] = config_to_json(s.config);
  j["frames_total"] = s.frames_total;
  j["frames_ok"] = s.frames_ok;
  j["frames_failed"] = s.frames_failed;
  j["lines_skipped"] = s.lines_skipped;
  std::vector<std::string> files = s.files;
  files.emplace_back("run_summary.json");
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  j["files"] = files;
  write_json(out_dir / "run_summary.json", j);
}

// -------------------------------------------------------- synthetic dataset

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  for (;;) {
    const Eigen::Vector3d v(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const double n = v.norm();
    if (n > 0.1 && n <= 1.0) return v / n;
  }
}

constexpr std::array<const char*, 5> kGestures = {"tap_index", "tap_middle", "pinch_index", "pinch_middle", "fist"};

}  // namespace

SyntheticDataset make_synthetic_dataset(const RiggedHandTemplate& tmpl, const SyntheticDatasetConfig& cfg,
                                        const OcclusionConfig& occlusion) {
  if (cfg.frames < 1 || cfg.subjects < 1) throw InvariantError("synthetic dataset needs frames and subjects");
  SyntheticDataset ds;
  ds.rig.fx = ds.rig.fy = 600.0;
  ds.rig.cx = 320.0;
  ds.rig.cy = 240.0;
  ds.rig.width = 640;
  ds.rig.height = 480;

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> tones;
  for (int s = 0; s < cfg.subjects; ++s) tones.push_back(1 + static_cast<int>(rng() % 10));

  for (int f = 0; f < cfg.frames; ++f) {
    HandState st = HandState::neutral(tmpl.shape_rank());
    for (int j = 1; j < kNumJoints; ++j) {
      const bool proximal = tmpl.parents[static_cast<std::size_t>(j)] == 0;
      const Eigen::Vector3d local(radians(uniform(rng, -10.0, 80.0)),
                                  radians(proximal ? uniform(rng, -12.0, 12.0) : uniform(rng, -4.0, 4.0)),
                                  radians(uniform(rng, -4.0, 4.0)));
      st.pose.row(j - 1) = (tmpl.joint_frames[static_cast<std::size_t>(j)] * local).transpose();
    }
    for (Eigen::Index s = 0; s < st.shape.size(); ++s) st.shape(s) = uniform(rng, -1.0, 1.0);
    const Eigen::Matrix3d orient =
        (Eigen::AngleAxisd(radians(uniform(rng, -150.0, 150.0)), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(radians(uniform(rng, -50.0, 50.0)), Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    st.global_orient = matrix_to_axis_angle(orient);
    st.translation = Eigen::Vector3d(uniform(rng, -0.03, 0.03), uniform(rng, -0.03, 0.03), 0.45 + uniform(rng, -0.05, 0.05));

    const HandMesh mesh = pose_mesh(tmpl, st);
    const double vis = visibility_report(mesh, tmpl, ds.rig, occlusion).mean_finger_visibility;
    ds.visibility.push_back(vis);

    FrameAnnotation ann;
    char id[32];
    std::snprintf(id, sizeof id, "f%04d", f);
    ann.frame_id = id;
    const int subject = f % cfg.subjects;
    std::snprintf(id, sizeof id, "s%02d", subject + 1);
    ann.subject_id = id;
    ann.gesture = kGestures[static_cast<std::size_t>(f) % kGestures.size()];
    ann.skin_tone = tones[static_cast<std::size_t>(subject)];
    const bool marker_only = cfg.marker_only_every > 0 && f % cfg.marker_only_every == cfg.marker_only_every - 1;
    const bool keypoint_only =
        !marker_only && cfg.keypoint_only_every > 0 && f % cfg.keypoint_only_every == cfg.keypoint_only_every - 1;
    if (marker_only) {
      MarkerTargets mk;
      const int count = 16;
      mk.points.resize(count, 3);
      for (int m = 0; m < count; ++m) {
        const int v = m * tmpl.num_vertices() / count;
        mk.vertex_ids.push_back(v);
        mk.points.row(m) = mesh.vertices.row(v);
      }
      ann.markers3d = std::move(mk);
    } else {
      KeypointTargets kp;
      kp.points = mesh.keypoints21;
      ann.keypoints3d = std::move(kp);
      if (!keypoint_only) ann.gt_state = st;
    }
    ds.frames.push_back(std::move(ann));

    const double err = std::clamp(cfg.error_intercept_deg + cfg.error_slope_deg * vis, 0.0, 179.0);
    Prediction pred;
    pred.frame_id = ds.frames.back().frame_id;
    pred.state = st;
    for (int j = 0; j < kNumArticulated; ++j) {
      const Eigen::Matrix3d r = axis_angle_to_matrix(Eigen::Vector3d(st.pose.row(j).transpose()));
      const Eigen::Matrix3d d = Eigen::AngleAxisd(radians(err), random_unit(rng)).toRotationMatrix();
      pred.state.pose.row(j) = matrix_to_axis_angle(Eigen::Matrix3d(r * d)).transpose();
    }
    ds.predictions.push_back(std::move(pred));
  }
  return ds;
}

}  // namespace dorsal
