#pragma once

#include "dorsal/common.hpp"
#include "dorsal/raster.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>

namespace dorsal {

enum class GridSource { Unknown, Reference, Target, Derived };

/// Dense H x W grid of C-dimensional patch features. `data` holds one patch
/// per row in (row, col) order, which is also the FGRID byte order.
struct FeatureGrid {
  using Storage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int height = 0;
  int width = 0;
  int channels = 0;
  int patch_size = 16;
  GridSource source = GridSource::Unknown;
  Storage data;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c, int patch = 16, GridSource src = GridSource::Unknown);

  Eigen::Index patch_index(int row, int col) const { return static_cast<Eigen::Index>(row) * width + col; }
  float& at(int row, int col, int ch) { return data(patch_index(row, col), ch); }
  float at(int row, int col, int ch) const { return data(patch_index(row, col), ch); }
};

/// Throws InvariantError on non-positive dimensions, wrong storage shape or
/// non-finite values.
void validate(const FeatureGrid& grid);

/// H x W cosine similarities in [-1, 1].
struct SimilarityMap {
  int patch_size = 16;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
};

/// ft - f0, elementwise.
FeatureGrid feature_delta(const FeatureGrid& f0, const FeatureGrid& ft);

/// Per-patch cosine of the channel vectors. A patch where either vector is
/// zero has similarity 0.
SimilarityMap cosine_map(const FeatureGrid& f0, const FeatureGrid& ft);

/// Channel stack [ft - f0 | cos(ft, f0) | ft | f0], 3C + 1 channels.
FeatureGrid fuse_change_tensor(const FeatureGrid& f0, const FeatureGrid& ft);

/// Maps cosine -1..1 linearly to 0..255 (rounded) and repeats each patch
/// patch_size x patch_size times. Darker means more different.
Raster similarity_to_image(const SimilarityMap& map);

/// FGRID v1: ASCII line "FGRID 1 <H> <W> <C> <patch>\n" followed by H*W*C
/// little-endian float32 values in (row, col, channel) order.
std::string encode_fgrid(const FeatureGrid& grid);
FeatureGrid decode_fgrid(const std::string& bytes);
FeatureGrid read_fgrid(const std::filesystem::path& path);
void write_fgrid(const std::filesystem::path& path, const FeatureGrid& grid);

}  // namespace dorsal
