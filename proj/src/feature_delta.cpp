#include "dorsal/feature_delta.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <sstream>

namespace dorsal {

FeatureGrid::FeatureGrid(int h, int w, int c, int patch, GridSource src)
    : height(h), width(w), channels(c), patch_size(patch), source(src) {
  if (h <= 0 || w <= 0 || c <= 0) throw InvariantError("feature grid dimensions must be positive");
  if (patch <= 0) throw InvariantError("patch size must be positive");
  data.setZero(static_cast<Eigen::Index>(h) * w, c);
}

void validate(const FeatureGrid& g) {
  if (g.height <= 0 || g.width <= 0 || g.channels <= 0) throw InvariantError("feature grid dimensions must be positive");
  if (g.patch_size <= 0) throw InvariantError("patch size must be positive");
  if (g.data.rows() != static_cast<Eigen::Index>(g.height) * g.width || g.data.cols() != g.channels) {
    throw DimensionError("feature grid storage does not match its dimensions");
  }
  if (!g.data.allFinite()) throw InvariantError("feature grid contains non-finite values");
}

namespace {

void check_pair(const FeatureGrid& f0, const FeatureGrid& ft) {
  validate(f0);
  validate(ft);
  if (f0.height != ft.height || f0.width != ft.width || f0.channels != ft.channels) {
    throw DimensionError("feature grids differ in shape");
  }
}

float cosine(const FeatureGrid::Storage& a, const FeatureGrid::Storage& b, Eigen::Index row) {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double x = a(row, c);
    const double y = b(row, c);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) return 0.0f;
  return static_cast<float>(std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0));
}

}  // namespace

FeatureGrid feature_delta(const FeatureGrid& f0, const FeatureGrid& ft) {
  check_pair(f0, ft);
  FeatureGrid out(f0.height, f0.width, f0.channels, ft.patch_size, GridSource::Derived);
  out.data = ft.data - f0.data;
  return out;
}

SimilarityMap cosine_map(const FeatureGrid& f0, const FeatureGrid& ft) {
  check_pair(f0, ft);
  SimilarityMap map;
  map.patch_size = ft.patch_size;
  map.values.resize(f0.height, f0.width);
  for (int r = 0; r < f0.height; ++r) {
    for (int c = 0; c < f0.width; ++c) map.values(r, c) = cosine(f0.data, ft.data, f0.patch_index(r, c));
  }
  return map;
}

FeatureGrid fuse_change_tensor(const FeatureGrid& f0, const FeatureGrid& ft) {
  check_pair(f0, ft);
  const int c = f0.channels;
  FeatureGrid out(f0.height, f0.width, 3 * c + 1, ft.patch_size, GridSource::Derived);
  const SimilarityMap cos = cosine_map(f0, ft);
  out.data.leftCols(c) = feature_delta(f0, ft).data;
  out.data.col(c) = cos.values.reshaped<Eigen::RowMajor>();
  out.data.middleCols(c + 1, c) = ft.data;
  out.data.rightCols(c) = f0.data;
  return out;
}

Raster similarity_to_image(const SimilarityMap& map) {
  if (map.values.size() == 0) throw DimensionError("similarity map is empty");
  if (map.patch_size <= 0) throw InvariantError("patch size must be positive");
  const int p = map.patch_size;
  const auto h = static_cast<int>(map.values.rows());
  const auto w = static_cast<int>(map.values.cols());
  Raster img(w * p, h * p);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = std::clamp(static_cast<double>(map.values(r, c)), -1.0, 1.0);
      const auto level = static_cast<float>(std::round((v + 1.0) / 2.0 * 255.0));
      for (int dr = 0; dr < p; ++dr) {
        for (int dc = 0; dc < p; ++dc) img.at(r * p + dr, c * p + dc) = level;
      }
    }
  }
  return img;
}

std::string encode_fgrid(const FeatureGrid& grid) {
  validate(grid);
  std::string out = "FGRID 1 " + std::to_string(grid.height) + " " + std::to_string(grid.width) + " " +
                    std::to_string(grid.channels) + " " + std::to_string(grid.patch_size) + "\n";
  const std::size_t header = out.size();
  const auto n = static_cast<std::size_t>(grid.data.size());
  out.resize(header + 4 * n);
  char* dst = out.data() + header;
  for (std::size_t i = 0; i < n; ++i) {
    auto bits = std::bit_cast<std::uint32_t>(grid.data.data()[i]);
    for (int b = 0; b < 4; ++b) dst[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

FeatureGrid decode_fgrid(const std::string& bytes) {
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos || eol > 256) throw ParseError("FGRID header line missing");
  std::istringstream hdr(bytes.substr(0, eol));
  std::string magic;
  int version = 0;
  long h = 0, w = 0, c = 0, patch = 0;
  if (!(hdr >> magic >> version >> h >> w >> c >> patch) || magic != "FGRID") {
    throw ParseError("malformed FGRID header");
  }
  std::string rest;
  if (hdr >> rest) throw ParseError("malformed FGRID header");
  if (version != 1) throw ParseError("unsupported FGRID version " + std::to_string(version));
  if (h <= 0 || w <= 0 || c <= 0 || patch <= 0 || h > 1 << 16 || w > 1 << 16 || c > 1 << 20) {
    throw ParseError("FGRID dimensions out of range");
  }
  const auto n = static_cast<std::size_t>(h * w * c);
  if (bytes.size() - eol - 1 != 4 * n) throw ParseError("FGRID payload size does not match the header");

  FeatureGrid grid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), static_cast<int>(patch));
  const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + eol + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
    grid.data.data()[i] = std::bit_cast<float>(bits);
  }
  if (!grid.data.allFinite()) throw ParseError("FGRID contains non-finite values");
  return grid;
}

FeatureGrid read_fgrid(const std::filesystem::path& path) { return decode_fgrid(detail::read_text_file(path)); }

void write_fgrid(const std::filesystem::path& path, const FeatureGrid& grid) {
  detail::write_text_file(path, encode_fgrid(grid));
}

}  // namespace dorsal
