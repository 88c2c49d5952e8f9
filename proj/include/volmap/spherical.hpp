#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "volmap/tensor.hpp"
#include "volmap/types.hpp"

// Spherical range-image projection and the collision diagnostic. A fused
// multi-sensor cloud projected onto one sphere loses every point that shares
// a (layer, azimuth bin) pixel with a nearer point; the volumetric grid keeps
// such points apart whenever their cells differ. This module measures that.

namespace volmap {

struct SphericalConfig {
  std::int32_t n_layers = 80;   // image height; pixel row = point layer index
  std::int32_t n_angles = 600;  // image width
  std::pair<double, double> azimuth_range{-3.14159265358979323846,
                                          3.14159265358979323846};

  void validate() const;
};

struct SphericalImage {
  /// [2, n_layers, n_angles]; channel 0 = range (m), channel 1 = intensity.
  /// Empty pixels are 0 in both channels.
  Tensor image;
  /// Winning point index per pixel, -1 where empty. Row-major [layer][angle].
  std::vector<std::int64_t> winner;
  /// Points displaced by a nearer point at their pixel.
  std::size_t collisions = 0;
  std::size_t in_range = 0;
  std::size_t dropped_azimuth = 0;
  std::size_t dropped_layer = 0;
};

/// Projects each point to pixel (layer, floor((atan2(y,x) - az_min) / span *
/// n_angles)). The nearest point (3D Euclidean range) wins a pixel; exact
/// range ties keep the lower point index. Points whose azimuth bin or layer
/// falls outside the image are dropped and counted, not errors.
SphericalImage spherical_project(const PointCloud& cloud,
                                 const SphericalConfig& cfg);

struct OcclusionReport {
  std::size_t total_points = 0;
  std::size_t in_range = 0;
  std::size_t collisions = 0;
  double collision_rate = 0.0;  // collisions / in_range; 0 on an empty cloud
  /// Unordered sensor pair (low id, high id) -> displaced-point count, the
  /// pair being the winner's sensor and the displaced point's sensor.
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> pair_collisions;
};

/// Projects the fused cloud and attributes every displaced point to the
/// sensor pair involved.
OcclusionReport occlusion_report(const PointCloud& fused,
                                 const SphericalConfig& cfg);

}  // namespace volmap
