#pragma once

// Internal helpers shared by the JSON-backed readers and writers.

#include "dorsal/common.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace dorsal::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline const json& require(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return doc.at(key);
}

inline void require_schema(const json& doc, std::string_view expected) {
  const json& s = require(doc, "schema");
  if (!s.is_string() || s.get<std::string>() != expected) {
    throw ParseError("schema version mismatch: expected '" + std::string(expected) + "', got " + s.dump());
  }
}

/// Reads an array of equally sized numeric rows into a dense matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> read_rows(const json& arr, const char* what,
                                                                Eigen::Index cols = -1) {
  if (!arr.is_array()) throw ParseError(std::string(what) + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(arr.size());
  if (rows > 0 && cols < 0) {
    if (!arr[0].is_array()) throw ParseError(std::string(what) + " rows must be arrays");
    cols = static_cast<Eigen::Index>(arr[0].size());
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols < 0 ? 0 : cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = arr[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(std::string(what) + ": row " + std::to_string(r) + " has wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError(std::string(what) + ": non-numeric entry");
      m(r, c) = v.get<Scalar>();
    }
  }
  return m;
}

inline Eigen::VectorXd read_vector(const json& arr, const char* what) {
  if (!arr.is_array()) throw ParseError(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(std::string(what) + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

template <typename Derived>
json write_rows(const Eigen::MatrixBase<Derived>& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(std::move(row));
  }
  return arr;
}

template <typename Derived>
json write_vector(const Eigen::MatrixBase<Derived>& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dorsal::detail
