#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "volmap/labeler.hpp"
#include "volmap/tensor.hpp"
#include "volmap/types.hpp"

// Volumetric bird-eye-view grid: x/y are rasterized, z is never discretized;
// the LiDAR layer index is the channel axis, so height information survives
// as-is. Cell values are max-aggregated intensities (0 = empty).

namespace volmap {

struct GridConfig {
  std::pair<double, double> x_range{-30.0, 30.0};
  std::pair<double, double> y_range{-20.0, 20.0};
  double res_x = 0.4;
  double res_y = 0.4;
  std::int32_t n_layers = 10;
  std::int32_t pad_to_multiple = 8;
  /// Forces the grid to (rows, cols), shifting the raster origin so the
  /// padding (or cut) is split evenly between the low and high sides.
  std::optional<std::pair<std::int32_t, std::int32_t>> shape_override;

  void validate() const;

  /// ceil(extent / res); a 1e-9 slack absorbs quotients landing an ulp above
  /// an intended integer.
  std::int32_t derived_rows() const;
  std::int32_t derived_cols() const;

  std::int32_t rows() const;
  std::int32_t cols() const;

  /// Extra low-side cells introduced by shape_override (negative = cells cut).
  std::int32_t row_shift() const;
  std::int32_t col_shift() const;

  /// Raster origin: x_range.min minus the shift, in meters.
  double origin_x() const;
  double origin_y() const;
};

struct VolGrid {
  Tensor values;                         // [n_layers, rows, cols]
  std::vector<std::int32_t> point_row;   // per input point; -1 when out of ROI
  std::vector<std::int32_t> point_col;
  std::vector<std::size_t> out_of_roi;   // ascending point indices

  std::size_t in_roi_count() const { return point_row.size() - out_of_roi.size(); }
};

/// Rasterizes the cloud. A point is in ROI iff its x/y lie inside the
/// configured half-open ranges and its cell falls inside the (possibly
/// overridden) grid. Cell value = max intensity over its points, per layer.
/// Throws when a point's layer is outside [0, n_layers) or a coordinate is
/// non-finite.
VolGrid voxelize(const PointCloud& cloud, const GridConfig& cfg);

/// Per-cell training target: majority label over the cell's points, ties
/// broken toward the class with the lower frequency in stats (then the lower
/// class id). Empty cells and cells holding only ignore-labeled points get the
/// ignore sentinel. The cloud must be the one that produced grid.
LabelGrid cell_ground_truth(const VolGrid& grid, const PointCloud& cloud,
                            const ClassStats& stats);

/// Copies the cloud and labels every in-ROI point with its cell's entry;
/// out-of-ROI points get the ignore sentinel. Point order is preserved.
PointCloud backproject(const LabelGrid& cell_labels, const VolGrid& grid,
                       const PointCloud& cloud);

struct CropRecord {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Zero-pads dims 1 and 2 of a [C,H,W] tensor up to the next multiple of m on
/// the high side; rec records the original extents.
template <typename T>
TensorT<T> pad_to_multiple(const TensorT<T>& values, int m, CropRecord& rec);

/// Inverse of pad_to_multiple.
template <typename T>
TensorT<T> crop_back(const TensorT<T>& values, const CropRecord& rec);

LabelGrid crop_back(const LabelGrid& labels, const CropRecord& rec);

}  // namespace volmap
