#include "volmap/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "volmap/error.hpp"

namespace volmap {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto v : counts) t += v;
  return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_classes != n_classes)
    throw Error("cannot merge confusion matrices of different class counts");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  pred_ignored += other.pred_ignored;
}

void accumulate(ConfusionMatrix& cm, const PointCloud& gt_cloud,
                const PointCloud& pred_cloud) {
  if (gt_cloud.size() != pred_cloud.size())
    throw Error("ground truth and prediction differ in point count (" +
                std::to_string(gt_cloud.size()) + " vs " +
                std::to_string(pred_cloud.size()) + ")");
  if (!gt_cloud.has_labels() || !pred_cloud.has_labels())
    throw Error("both clouds must carry labels");
  for (std::size_t i = 0; i < gt_cloud.size(); ++i) {
    const std::int32_t g = gt_cloud.label[i];
    if (g == kIgnoreLabel) continue;
    const std::int32_t p = pred_cloud.label[i];
    if (p == kIgnoreLabel) {
      ++cm.pred_ignored;
      continue;
    }
    if (g < 0 || static_cast<std::size_t>(g) >= cm.n_classes ||
        p < 0 || static_cast<std::size_t>(p) >= cm.n_classes)
      throw Error("point " + std::to_string(i) + " labels (" + std::to_string(g) +
                  "," + std::to_string(p) + ") exceed the matrix class count");
    ++cm.at(static_cast<std::size_t>(g), static_cast<std::size_t>(p));
  }
}

std::vector<std::optional<double>> iou(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.n_classes);
  for (std::size_t c = 0; c < cm.n_classes; ++c) {
    const std::int64_t tp = cm.at(c, c);
    std::int64_t fp = 0, fn = 0;
    for (std::size_t k = 0; k < cm.n_classes; ++k) {
      if (k == c) continue;
      fp += cm.at(k, c);
      fn += cm.at(c, k);
    }
    const std::int64_t denom = tp + fp + fn;
    if (denom > 0)
      out[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

std::optional<double> mean_iou(
    const std::vector<std::optional<double>>& per_class) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_class) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::size_t>(std::ceil(q * n));
  if (idx > 0) --idx;
  return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

TimingReport time_inference(const PointCloud& cloud, const ModelParams& params,
                            const GridConfig& grid_cfg, int n_warmup, int n_runs) {
  if (n_runs < 1) throw Error("timing needs at least one measured run");
  if (n_warmup < 0) throw Error("warmup count cannot be negative");
  using clock = std::chrono::steady_clock;

  for (int i = 0; i < n_warmup; ++i) (void)infer(cloud, params, grid_cfg);

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(n_runs));
  for (int i = 0; i < n_runs; ++i) {
    const auto t0 = clock::now();
    (void)infer(cloud, params, grid_cfg);
    const auto t1 = clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  TimingReport report;
  report.n_warmup = n_warmup;
  report.n_runs = n_runs;
  report.grid_shape = {static_cast<std::size_t>(grid_cfg.n_layers),
                       static_cast<std::size_t>(grid_cfg.rows()),
                       static_cast<std::size_t>(grid_cfg.cols())};
  report.threads = 1;
  double sum = 0.0;
  for (const double v : ms) sum += v;
  report.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  report.p50_ms = nearest_rank(ms, 0.5);
  report.p95_ms = nearest_rank(ms, 0.95);
  return report;
}

}  // namespace volmap
