#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "volmap/types.hpp"
#include "volmap/volmapnet.hpp"

// Per-class IOU on raw points. Evaluation happens on the original cloud, not
// on grid cells, so points dropped by the grid still count against the score.

namespace volmap {

struct ConfusionMatrix {
  explicit ConfusionMatrix(std::size_t n_classes = 0)
      : n_classes(n_classes), counts(n_classes * n_classes, 0) {}

  std::size_t n_classes;
  std::vector<std::int64_t> counts;  // rows = ground truth, cols = prediction
  /// Points whose prediction is the ignore sentinel (e.g. out of grid ROI)
  /// while the ground truth is a real class; excluded from counts.
  std::int64_t pred_ignored = 0;

  std::int64_t& at(std::size_t gt, std::size_t pred) {
    return counts[gt * n_classes + pred];
  }
  std::int64_t at(std::size_t gt, std::size_t pred) const {
    return counts[gt * n_classes + pred];
  }
  std::int64_t total() const;
  void merge(const ConfusionMatrix& other);
};

/// Adds one (ground truth, prediction) pair per point. Ignore-labeled ground
/// truth is skipped; a real-class point with an ignore-labeled prediction is
/// tallied in pred_ignored. Throws on size mismatch or labels >= n_classes.
void accumulate(ConfusionMatrix& cm, const PointCloud& gt_cloud,
                const PointCloud& pred_cloud);

/// IOU_c = TP / (TP + FP + FN). A class with an empty denominator is absent
/// (nullopt), not zero.
std::vector<std::optional<double>> iou(const ConfusionMatrix& cm);

/// Mean over present classes; nullopt when every class is absent.
std::optional<double> mean_iou(const std::vector<std::optional<double>>& per_class);

struct TimingReport {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  int n_warmup = 0;
  int n_runs = 0;
  std::vector<std::size_t> grid_shape;  // [n_layers, rows, cols]
  int threads = 1;
};

/// Wall-clock of the in-memory infer pipeline (voxelize, forward, backproject;
/// no file IO). Warmup runs are discarded. p50/p95 use the nearest-rank rule.
TimingReport time_inference(const PointCloud& cloud, const ModelParams& params,
                            const GridConfig& grid_cfg, int n_warmup, int n_runs);

}  // namespace volmap
