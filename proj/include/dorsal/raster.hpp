#pragma once

#include "dorsal/common.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace dorsal {

/// Dense image or grid, row-major with channels innermost.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Raster() = default;
  Raster(int w, int h, int c = 1, float fill = 0.0f);

  bool empty() const { return data.empty(); }
  std::size_t index(int row, int col, int ch = 0) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(ch);
  }
  float& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
  float at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }
};

/// Binary PGM (P5) or PPM (P6), 8 or 16 bit. Sample values are kept in the
/// file's integer units.
Raster read_pnm(const std::filesystem::path& path);
Raster parse_pnm(const std::string& bytes);

/// Writes P5 for one channel and P6 for three. Values are rounded and clamped
/// to [0, maxval]; maxval above 255 selects 16-bit big-endian samples.
std::string encode_pnm(const Raster& image, int maxval = 255);
void write_pnm(const std::filesystem::path& path, const Raster& image, int maxval = 255);

}  // namespace dorsal
