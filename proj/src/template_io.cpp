#include "dorsal/template_io.hpp"

#include "json_util.hpp"

namespace dorsal {

using detail::json;

RiggedHandTemplate parse_template(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("template is not valid JSON: ") + e.what());
  }
  detail::require_schema(doc, kTemplateSchema);

  RiggedHandTemplate t;
  try {
    t.rest_vertices = detail::read_rows<double>(detail::require(doc, "rest_vertices"), "rest_vertices", 3);
    t.faces = detail::read_rows<int>(detail::require(doc, "faces"), "faces", 3);

    const json& parents = detail::require(doc, "parents");
    if (!parents.is_array() || parents.size() != kNumJoints) throw ParseError("parents must list 16 joints");
    for (int j = 0; j < kNumJoints; ++j) t.parents[static_cast<std::size_t>(j)] = parents[static_cast<std::size_t>(j)].get<int>();

    t.rest_joints = detail::read_rows<double>(detail::require(doc, "rest_joints"), "rest_joints", 3);
    t.skinning_weights = detail::read_rows<double>(detail::require(doc, "skinning_weights"), "skinning_weights", kNumJoints);
    t.joint_regressor = detail::read_rows<double>(detail::require(doc, "joint_regressor"), "joint_regressor",
                                                  t.rest_vertices.rows());

    const json& basis = detail::require(doc, "shape_basis");
    if (!basis.is_array()) throw ParseError("shape_basis must be an array");
    for (const json& field : basis) t.shape_basis.push_back(detail::read_rows<double>(field, "shape_basis", 3));

    const json& kmap = detail::require(doc, "keypoint_map");
    if (!kmap.is_array() || kmap.size() != kNumKeypoints) throw ParseError("keypoint_map must have exactly 21 entries");
    for (std::size_t k = 0; k < kmap.size(); ++k) {
      const json& e = kmap[k];
      if (e.contains("joint")) {
        t.keypoint_map[k] = {KeypointSource::Kind::Joint, e.at("joint").get<int>()};
      } else if (e.contains("vertex")) {
        t.keypoint_map[k] = {KeypointSource::Kind::Vertex, e.at("vertex").get<int>()};
      } else {
        throw ParseError("keypoint_map entry " + std::to_string(k) + " needs 'joint' or 'vertex'");
      }
    }

    const json& labels = detail::require(doc, "part_labels");
    if (!labels.is_array()) throw ParseError("part_labels must be an array");
    for (const json& l : labels) {
      const auto part = parse_part(l.get<std::string>());
      if (!part) throw ParseError("unknown part label " + l.dump());
      t.part_labels.push_back(*part);
    }

    t.joint_frames.fill(Eigen::Matrix3d::Identity());
    if (doc.contains("joint_frames")) {
      const json& frames = doc.at("joint_frames");
      if (!frames.is_array() || frames.size() != kNumJoints) throw ParseError("joint_frames must list 16 matrices");
      for (std::size_t j = 0; j < kNumJoints; ++j) t.joint_frames[j] = detail::read_rows<double>(frames[j], "joint_frames", 3);
    }
    if (doc.contains("joint_names")) {
      const json& names = doc.at("joint_names");
      if (!names.is_array() || names.size() != kNumJoints) throw ParseError("joint_names must list 16 names");
      for (std::size_t j = 0; j < kNumJoints; ++j) t.joint_names[j] = names[j].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("template field has wrong type: ") + e.what());
  }

  validate(t);
  return t;
}

RiggedHandTemplate load_template(const std::filesystem::path& path) {
  return parse_template(detail::read_text_file(path));
}

std::string serialize_template(const RiggedHandTemplate& t) {
  detail::ordered_json doc;
  doc["schema"] = kTemplateSchema;
  doc["rest_vertices"] = detail::write_rows(t.rest_vertices);
  doc["faces"] = detail::write_rows(t.faces);
  doc["parents"] = t.parents;
  doc["rest_joints"] = detail::write_rows(t.rest_joints);
  doc["skinning_weights"] = detail::write_rows(t.skinning_weights);
  json basis = json::array();
  for (const auto& b : t.shape_basis) basis.push_back(detail::write_rows(b));
  doc["shape_basis"] = basis;
  doc["joint_regressor"] = detail::write_rows(t.joint_regressor);
  json kmap = json::array();
  for (const auto& k : t.keypoint_map) {
    kmap.push_back({{k.kind == KeypointSource::Kind::Joint ? "joint" : "vertex", k.index}});
  }
  doc["keypoint_map"] = kmap;
  json labels = json::array();
  for (Part p : t.part_labels) labels.push_back(part_name(p));
  doc["part_labels"] = labels;
  json frames = json::array();
  for (const auto& f : t.joint_frames) frames.push_back(detail::write_rows(f));
  doc["joint_frames"] = frames;
  doc["joint_names"] = t.joint_names;
  return doc.dump(1) + "\n";
}

void save_template(const RiggedHandTemplate& tmpl, const std::filesystem::path& path) {
  detail::write_text_file(path, serialize_template(tmpl));
}

}  // namespace dorsal
