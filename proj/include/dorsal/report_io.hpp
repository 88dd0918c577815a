#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dorsal {

/// Fixed CSV number format: 6 significant digits, "%.6g", with negative zero
/// normalized to 0 so output bytes do not depend on the sign of tiny values.
std::string format_number(double value);

/// Minimal CSV writer with a fixed column order. Rows are accumulated in
/// memory and written in one go.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns, std::vector<std::string> header_comments = {});

  CsvTable& add_row(std::vector<std::string> cells);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::vector<std::string>> rows_;
};

/// Splits one CSV line on commas. Quoting is not supported; none of the
/// formats read here need it.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace dorsal
