#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "volmap/dataio.hpp"
#include "volmap/spherical.hpp"
#include "volmap/volmapnet.hpp"

// One JSON run config drives every pipeline stage. Parsing is strict: unknown
// keys and type mismatches are reported with their JSON pointer. Every
// consumer writes back a fully resolved echo (all defaults materialized) so a
// run can be reproduced from its outputs alone.

namespace volmap {

nlohmann::json grid_to_json(const GridConfig& cfg);
GridConfig grid_from_json(const nlohmann::json& j, const std::string& base);

nlohmann::json net_to_json(const NetConfig& cfg);
NetConfig net_from_json(const nlohmann::json& j, const std::string& base);

nlohmann::json train_to_json(const TrainConfig& cfg);
TrainConfig train_from_json(const nlohmann::json& j, const std::string& base);

nlohmann::json spherical_to_json(const SphericalConfig& cfg);
SphericalConfig spherical_from_json(const nlohmann::json& j, const std::string& base);

struct DataConfig {
  std::string frames_dir;
  /// Elevation span used to bin points into layers when a cloud has no layer
  /// sidecar file.
  std::pair<double, double> elev_range{kHdl64ElevMin, kHdl64ElevMax};
};

struct RunConfig {
  std::uint64_t seed = 1;
  GridConfig grid;
  NetConfig net;
  TrainConfig train;
  SphericalConfig spherical;
  DataConfig data;
  /// Per-class frequencies for the loss weights; computed from the training
  /// labels when absent.
  std::optional<std::vector<double>> class_frequencies;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json resolved_json(const RunConfig& cfg);

}  // namespace volmap
