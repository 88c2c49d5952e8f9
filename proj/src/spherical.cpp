#include "volmap/spherical.hpp"

#include <cmath>

#include "volmap/error.hpp"

namespace volmap {

namespace {

struct PixelHit {
  bool ok = false;
  std::size_t pixel = 0;
  double range = 0.0;
};

PixelHit locate(const PointCloud& cloud, std::size_t i, const SphericalConfig& cfg,
                std::size_t* dropped_azimuth, std::size_t* dropped_layer) {
  PixelHit hit;
  const std::int32_t layer = cloud.layer[i];
  if (layer < 0 || layer >= cfg.n_layers) {
    ++*dropped_layer;
    return hit;
  }
  const double az = std::atan2(cloud.y[i], cloud.x[i]);
  const double span = cfg.azimuth_range.second - cfg.azimuth_range.first;
  const auto bin = static_cast<std::int64_t>(
      std::floor((az - cfg.azimuth_range.first) / span * cfg.n_angles));
  if (bin < 0 || bin >= cfg.n_angles) {
    ++*dropped_azimuth;
    return hit;
  }
  hit.ok = true;
  hit.pixel = static_cast<std::size_t>(layer) * cfg.n_angles +
              static_cast<std::size_t>(bin);
  hit.range = std::sqrt(cloud.x[i] * cloud.x[i] + cloud.y[i] * cloud.y[i] +
                        cloud.z[i] * cloud.z[i]);
  return hit;
}

}  // namespace

void SphericalConfig::validate() const {
  if (n_layers < 1 || n_angles < 1)
    throw Error("spherical image needs at least one layer and one angle bin");
  if (!(azimuth_range.second > azimuth_range.first))
    throw Error("azimuth range max must exceed min");
}

SphericalImage spherical_project(const PointCloud& cloud,
                                 const SphericalConfig& cfg) {
  cfg.validate();
  SphericalImage out;
  out.image = Tensor({2, static_cast<std::size_t>(cfg.n_layers),
                      static_cast<std::size_t>(cfg.n_angles)});
  const std::size_t n_pixels =
      static_cast<std::size_t>(cfg.n_layers) * cfg.n_angles;
  out.winner.assign(n_pixels, -1);
  std::vector<double> best_range(n_pixels, 0.0);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const PixelHit hit =
        locate(cloud, i, cfg, &out.dropped_azimuth, &out.dropped_layer);
    if (!hit.ok) continue;
    ++out.in_range;
    if (out.winner[hit.pixel] < 0 || hit.range < best_range[hit.pixel]) {
      out.winner[hit.pixel] = static_cast<std::int64_t>(i);
      best_range[hit.pixel] = hit.range;
    }
  }

  std::size_t occupied = 0;
  for (std::size_t p = 0; p < n_pixels; ++p) {
    if (out.winner[p] < 0) continue;
    ++occupied;
    const auto i = static_cast<std::size_t>(out.winner[p]);
    out.image.data[p] = static_cast<float>(best_range[p]);
    out.image.data[n_pixels + p] = static_cast<float>(cloud.intensity[i]);
  }
  out.collisions = out.in_range - occupied;
  return out;
}

OcclusionReport occlusion_report(const PointCloud& fused,
                                 const SphericalConfig& cfg) {
  const SphericalImage proj = spherical_project(fused, cfg);
  OcclusionReport report;
  report.total_points = fused.size();
  report.in_range = proj.in_range;
  report.collisions = proj.collisions;
  report.collision_rate =
      proj.in_range == 0
          ? 0.0
          : static_cast<double>(proj.collisions) / static_cast<double>(proj.in_range);

  std::size_t dropped_azimuth = 0, dropped_layer = 0;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const PixelHit hit = locate(fused, i, cfg, &dropped_azimuth, &dropped_layer);
    if (!hit.ok) continue;
    const std::int64_t w = proj.winner[hit.pixel];
    if (w == static_cast<std::int64_t>(i)) continue;
    const std::int32_t sa = fused.sensor_id[static_cast<std::size_t>(w)];
    const std::int32_t sb = fused.sensor_id[i];
    const auto key = sa <= sb ? std::make_pair(sa, sb) : std::make_pair(sb, sa);
    ++report.pair_collisions[key];
  }
  return report;
}

}  // namespace volmap
