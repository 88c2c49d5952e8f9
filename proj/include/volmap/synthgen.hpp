#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "volmap/geometry.hpp"
#include "volmap/types.hpp"

// Synthetic multi-LiDAR cocoon scenes: several sensors mounted around a
// vehicle, each raycasting against oriented boxes and a ground plane. Output
// uses the same formats as real captures so every downstream path is
// format-identical. Fully determined by the seed.

namespace volmap {

struct SensorSpec {
  std::int32_t id = 1;
  SensorPose pose;  // sensor frame -> vehicle frame
  std::int32_t n_layers = 4;
  std::pair<double, double> azimuth_fov{-1.5707963267948966,
                                        1.5707963267948966};  // sensor frame
  double azimuth_step = 0.005;                                // radians
  std::pair<double, double> elev_fov{-0.30, -0.06};
  double max_range = 50.0;
};

struct SceneSpec {
  std::uint64_t seed = 1;
  bool ground = true;
  double ground_z = -1.7;  // vehicle frame
  /// Uniform per-frame jitter applied to obstacle centers (x and y), meters.
  double frame_jitter = 0.0;
  std::vector<OrientedBox3D> obstacles;
  std::vector<SensorSpec> sensors;

  void validate() const;
};

struct SensorFrame {
  std::int32_t sensor_id = 0;
  PointCloud cloud;  // sensor frame
  SensorPose pose;
};

/// One ray per (layer, azimuth step), both at bin centers. The nearest
/// box/ground intersection within max_range yields a labeled point (box class,
/// or 0 for ground); rays that hit nothing emit nothing. Box hits are clamped
/// a hair inside the box in its own frame, so every foreground point passes
/// point_in_box. Intensity = per-class constant plus seeded noise in +-0.05,
/// clamped to [0,1].
std::vector<SensorFrame> generate(const SceneSpec& spec);

/// Deterministic per-frame variant: re-seeds the noise and jitters obstacle
/// centers by frame_jitter. frame_variant(spec, k) is stable in k.
SceneSpec frame_variant(const SceneSpec& spec, std::int32_t frame_index);

/// Frames restricted to the listed sensor ids; order preserved.
std::vector<SensorFrame> sensor_subset(const std::vector<SensorFrame>& frames,
                                       const std::vector<std::int32_t>& ids);

/// Vehicle-frame fusion of every frame's cloud.
PointCloud fuse_frames(const std::vector<SensorFrame>& frames);

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);
SceneSpec load_scene(const std::string& path);

}  // namespace volmap
