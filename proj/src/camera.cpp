#include "dorsal/camera.hpp"

#include "json_util.hpp"

#include <Eigen/LU>

#include <cmath>

namespace dorsal {

using detail::json;

void validate(const CameraRig& rig) {
  if (!(rig.fx > 0.0) || !(rig.fy > 0.0)) throw InvariantError("focal lengths must be positive");
  if (rig.width <= 0 || rig.height <= 0) throw InvariantError("image size must be positive");
  if (!rig.rotation.allFinite() || !rig.translation.allFinite()) throw InvariantError("extrinsics not finite");
  const double ortho = (rig.rotation.transpose() * rig.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9 || std::abs(rig.rotation.determinant() - 1.0) > 1e-9) {
    throw InvariantError("rotation must be orthonormal with det +1");
  }
}

CameraRig parse_calibration(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("calibration is not valid JSON: ") + e.what());
  }
  detail::require_schema(doc, kCalibrationSchema);
  CameraRig rig;
  try {
    const json& k = detail::require(doc, "intrinsics");
    rig.fx = detail::require(k, "fx").get<double>();
    rig.fy = detail::require(k, "fy").get<double>();
    rig.cx = detail::require(k, "cx").get<double>();
    rig.cy = detail::require(k, "cy").get<double>();
    const json& e = detail::require(doc, "extrinsics");
    const Eigen::MatrixXd r = detail::read_rows<double>(detail::require(e, "rotation"), "rotation", 3);
    if (r.rows() != 3) throw ParseError("rotation must be 3x3");
    rig.rotation = r;
    const Eigen::VectorXd t = detail::read_vector(detail::require(e, "translation"), "translation");
    if (t.size() != 3) throw ParseError("translation must have 3 entries");
    rig.translation = t;
    const json& size = detail::require(doc, "image_size");
    if (!size.is_array() || size.size() != 2) throw ParseError("image_size must be [width, height]");
    rig.width = size[0].get<int>();
    rig.height = size[1].get<int>();
  } catch (const json::exception& ex) {
    throw ParseError(std::string("calibration field has wrong type: ") + ex.what());
  }
  if (doc.contains("distortion") && !doc.at("distortion").empty()) {
    warn("calibration distortion coefficients are ignored; projection is pure pinhole");
  }
  validate(rig);
  return rig;
}

CameraRig load_calibration(const std::filesystem::path& path) {
  return parse_calibration(detail::read_text_file(path));
}

std::string serialize_calibration(const CameraRig& rig) {
  detail::ordered_json doc;
  doc["schema"] = kCalibrationSchema;
  doc["intrinsics"] = {{"fx", rig.fx}, {"fy", rig.fy}, {"cx", rig.cx}, {"cy", rig.cy}};
  detail::ordered_json ext;
  ext["rotation"] = detail::write_rows(rig.rotation);
  ext["translation"] = detail::write_vector(rig.translation);
  doc["extrinsics"] = ext;
  doc["image_size"] = {rig.width, rig.height};
  return doc.dump(2) + "\n";
}

}  // namespace dorsal
