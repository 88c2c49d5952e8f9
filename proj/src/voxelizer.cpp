#include "volmap/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <string>

#include "volmap/error.hpp"

namespace volmap {

namespace {

constexpr double kIndexSlack = 1e-9;

std::int32_t floor_div2(std::int32_t a) { return a < 0 ? (a - 1) / 2 : a / 2; }

std::int64_t cell_index(double coord, double origin, double res) {
  return static_cast<std::int64_t>(
      std::floor((coord - origin) / res + kIndexSlack));
}

std::int32_t ceil_cells(double extent, double res) {
  return static_cast<std::int32_t>(std::ceil(extent / res - kIndexSlack));
}

}  // namespace

void GridConfig::validate() const {
  if (!(x_range.second > x_range.first) || !(y_range.second > y_range.first))
    throw Error("grid range max must exceed min on both axes");
  if (!(res_x > 0.0) || !(res_y > 0.0))
    throw Error("grid resolution must be positive");
  if (n_layers < 1) throw Error("grid needs at least one layer");
  if (pad_to_multiple < 1) throw Error("pad_to_multiple must be >= 1");
  if (shape_override &&
      (shape_override->first < 1 || shape_override->second < 1))
    throw Error("shape_override extents must be >= 1");
}

std::int32_t GridConfig::derived_rows() const {
  return ceil_cells(x_range.second - x_range.first, res_x);
}

std::int32_t GridConfig::derived_cols() const {
  return ceil_cells(y_range.second - y_range.first, res_y);
}

std::int32_t GridConfig::rows() const {
  return shape_override ? shape_override->first : derived_rows();
}

std::int32_t GridConfig::cols() const {
  return shape_override ? shape_override->second : derived_cols();
}

std::int32_t GridConfig::row_shift() const {
  return shape_override ? floor_div2(shape_override->first - derived_rows()) : 0;
}

std::int32_t GridConfig::col_shift() const {
  return shape_override ? floor_div2(shape_override->second - derived_cols()) : 0;
}

double GridConfig::origin_x() const { return x_range.first - row_shift() * res_x; }

double GridConfig::origin_y() const { return y_range.first - col_shift() * res_y; }

VolGrid voxelize(const PointCloud& cloud, const GridConfig& cfg) {
  cfg.validate();
  const std::size_t n = cloud.size();
  const std::int32_t rows = cfg.rows(), cols = cfg.cols();
  const double ox = cfg.origin_x(), oy = cfg.origin_y();

  VolGrid g;
  g.values = Tensor({static_cast<std::size_t>(cfg.n_layers),
                     static_cast<std::size_t>(rows),
                     static_cast<std::size_t>(cols)});
  g.point_row.assign(n, -1);
  g.point_col.assign(n, -1);

  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t layer = cloud.layer[i];
    if (layer < 0 || layer >= cfg.n_layers)
      throw Error("point " + std::to_string(i) + " layer " +
                  std::to_string(layer) + " outside [0," +
                  std::to_string(cfg.n_layers) + ")");
    if (!cloud.finite(i))
      throw Error("point " + std::to_string(i) + " has a non-finite coordinate");
    const double x = cloud.x[i], y = cloud.y[i];
    bool in = x >= cfg.x_range.first && x < cfg.x_range.second &&
              y >= cfg.y_range.first && y < cfg.y_range.second;
    std::int64_t r = 0, c = 0;
    if (in) {
      r = cell_index(x, ox, cfg.res_x);
      c = cell_index(y, oy, cfg.res_y);
      in = r >= 0 && r < rows && c >= 0 && c < cols;
    }
    if (!in) {
      g.out_of_roi.push_back(i);
      continue;
    }
    g.point_row[i] = static_cast<std::int32_t>(r);
    g.point_col[i] = static_cast<std::int32_t>(c);
    float& cell = g.values.at(static_cast<std::size_t>(layer),
                              static_cast<std::size_t>(r),
                              static_cast<std::size_t>(c));
    const float intensity = static_cast<float>(cloud.intensity[i]);
    if (intensity > cell) cell = intensity;
  }
  return g;
}

LabelGrid cell_ground_truth(const VolGrid& grid, const PointCloud& cloud,
                            const ClassStats& stats) {
  if (grid.point_row.size() != cloud.size())
    throw Error("grid was built from a different cloud (point count mismatch)");
  if (!cloud.has_labels())
    throw Error("cell targets need a labeled cloud");
  const std::size_t rows = grid.values.shape[1], cols = grid.values.shape[2];
  LabelGrid out(rows, cols, kIgnoreLabel);

  // label -> count per occupied cell
  std::map<std::size_t, std::map<std::int32_t, std::int64_t>> counts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (grid.point_row[i] < 0) continue;
    const std::int32_t lab = cloud.label[i];
    if (lab == kIgnoreLabel) continue;
    if (lab < 0 || static_cast<std::size_t>(lab) >= stats.frequencies.size())
      throw Error("point " + std::to_string(i) + " label " + std::to_string(lab) +
                  " has no class statistics entry");
    const std::size_t cell =
        static_cast<std::size_t>(grid.point_row[i]) * cols +
        static_cast<std::size_t>(grid.point_col[i]);
    ++counts[cell][lab];
  }

  for (const auto& [cell, by_label] : counts) {
    std::int32_t best = -1;
    std::int64_t best_count = -1;
    for (const auto& [lab, cnt] : by_label) {
      if (cnt > best_count) {
        best = lab;
        best_count = cnt;
      } else if (cnt == best_count &&
                 stats.frequencies[static_cast<std::size_t>(lab)] <
                     stats.frequencies[static_cast<std::size_t>(best)]) {
        best = lab;
      }
    }
    out.data[cell] = best;
  }
  return out;
}

PointCloud backproject(const LabelGrid& cell_labels, const VolGrid& grid,
                       const PointCloud& cloud) {
  if (cell_labels.rows != grid.values.shape[1] ||
      cell_labels.cols != grid.values.shape[2])
    throw Error("cell label plane shape does not match the grid");
  if (grid.point_row.size() != cloud.size())
    throw Error("grid was built from a different cloud (point count mismatch)");

  PointCloud out = cloud;
  out.label.assign(cloud.size(), kIgnoreLabel);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (grid.point_row[i] < 0) continue;
    out.label[i] = cell_labels.at(static_cast<std::size_t>(grid.point_row[i]),
                                  static_cast<std::size_t>(grid.point_col[i]));
  }
  return out;
}

namespace {

std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace

template <typename T>
TensorT<T> pad_to_multiple(const TensorT<T>& values, int m, CropRecord& rec) {
  if (values.rank() != 3) throw Error("pad expects a [C,H,W] tensor");
  if (m < 1) throw Error("pad multiple must be >= 1");
  const std::size_t c = values.shape[0], h = values.shape[1], w = values.shape[2];
  rec = CropRecord{h, w};
  const std::size_t ph = round_up(h, static_cast<std::size_t>(m));
  const std::size_t pw = round_up(w, static_cast<std::size_t>(m));
  if (ph == h && pw == w) return values;
  TensorT<T> out({c, ph, pw});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      std::memcpy(out.data.data() + (ci * ph + y) * pw,
                  values.data.data() + (ci * h + y) * w, w * sizeof(T));
  return out;
}

template <typename T>
TensorT<T> crop_back(const TensorT<T>& values, const CropRecord& rec) {
  if (values.rank() != 3) throw Error("crop expects a [C,H,W] tensor");
  const std::size_t c = values.shape[0], h = values.shape[1], w = values.shape[2];
  if (rec.rows > h || rec.cols > w)
    throw Error("crop record exceeds the padded extents");
  if (rec.rows == h && rec.cols == w) return values;
  TensorT<T> out({c, rec.rows, rec.cols});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < rec.rows; ++y)
      std::memcpy(out.data.data() + (ci * rec.rows + y) * rec.cols,
                  values.data.data() + (ci * h + y) * w, rec.cols * sizeof(T));
  return out;
}

LabelGrid crop_back(const LabelGrid& labels, const CropRecord& rec) {
  if (rec.rows > labels.rows || rec.cols > labels.cols)
    throw Error("crop record exceeds the padded extents");
  LabelGrid out(rec.rows, rec.cols);
  for (std::size_t r = 0; r < rec.rows; ++r)
    for (std::size_t c = 0; c < rec.cols; ++c) out.at(r, c) = labels.at(r, c);
  return out;
}

template TensorT<float> pad_to_multiple<float>(const TensorT<float>&, int,
                                               CropRecord&);
template TensorT<double> pad_to_multiple<double>(const TensorT<double>&, int,
                                                 CropRecord&);
template TensorT<float> crop_back<float>(const TensorT<float>&, const CropRecord&);
template TensorT<double> crop_back<double>(const TensorT<double>&,
                                           const CropRecord&);

}  // namespace volmap
