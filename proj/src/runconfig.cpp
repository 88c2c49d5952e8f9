#include "volmap/runconfig.hpp"

#include <fstream>
#include <initializer_list>

#include "volmap/error.hpp"

namespace volmap {

namespace {

using nlohmann::json;

std::string ptr(const std::string& base, const char* key) {
  return base + "/" + key;
}

void expect_object(const json& j, const std::string& base) {
  if (!j.is_object())
    throw ConfigError("expected an object", base.empty() ? "/" : base);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& base) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown key", base + "/" + it.key());
  }
}

double num_or(const json& j, const char* key, double def, const std::string& base) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number())
    throw ConfigError("expected a number", ptr(base, key));
  return j.at(key).get<double>();
}

std::int64_t int_or(const json& j, const char* key, std::int64_t def,
                    const std::string& base) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number_integer())
    throw ConfigError("expected an integer", ptr(base, key));
  return j.at(key).get<std::int64_t>();
}

std::pair<double, double> range_or(const json& j, const char* key,
                                   std::pair<double, double> def,
                                   const std::string& base) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("expected [min, max]", ptr(base, key));
  return {v[0].get<double>(), v[1].get<double>()};
}

template <typename Cfg>
void validate_at(const Cfg& cfg, const std::string& base) {
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what(), base.empty() ? "/" : base);
  }
}

}  // namespace

json grid_to_json(const GridConfig& cfg) {
  json j;
  j["x_range"] = {cfg.x_range.first, cfg.x_range.second};
  j["y_range"] = {cfg.y_range.first, cfg.y_range.second};
  j["res_x"] = cfg.res_x;
  j["res_y"] = cfg.res_y;
  j["n_layers"] = cfg.n_layers;
  j["pad_to_multiple"] = cfg.pad_to_multiple;
  if (cfg.shape_override)
    j["shape_override"] = {cfg.shape_override->first, cfg.shape_override->second};
  else
    j["shape_override"] = nullptr;
  return j;
}

GridConfig grid_from_json(const json& j, const std::string& base) {
  expect_object(j, base);
  check_keys(j,
             {"x_range", "y_range", "res_x", "res_y", "n_layers",
              "pad_to_multiple", "shape_override"},
             base);
  GridConfig cfg;
  cfg.x_range = range_or(j, "x_range", cfg.x_range, base);
  cfg.y_range = range_or(j, "y_range", cfg.y_range, base);
  cfg.res_x = num_or(j, "res_x", cfg.res_x, base);
  cfg.res_y = num_or(j, "res_y", cfg.res_y, base);
  cfg.n_layers = static_cast<std::int32_t>(int_or(j, "n_layers", cfg.n_layers, base));
  cfg.pad_to_multiple =
      static_cast<std::int32_t>(int_or(j, "pad_to_multiple", cfg.pad_to_multiple, base));
  if (j.contains("shape_override") && !j.at("shape_override").is_null()) {
    const auto& v = j.at("shape_override");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
        !v[1].is_number_integer())
      throw ConfigError("expected [rows, cols] or null", ptr(base, "shape_override"));
    cfg.shape_override = {static_cast<std::int32_t>(v[0].get<std::int64_t>()),
                          static_cast<std::int32_t>(v[1].get<std::int64_t>())};
  }
  validate_at(cfg, base);
  return cfg;
}

json net_to_json(const NetConfig& cfg) {
  json j;
  j["in_channels"] = cfg.in_channels;
  j["n_classes"] = cfg.n_classes;
  j["base_channels"] = cfg.base_channels;
  j["multipliers"] = {cfg.multipliers[0], cfg.multipliers[1], cfg.multipliers[2]};
  return j;
}

NetConfig net_from_json(const json& j, const std::string& base) {
  expect_object(j, base);
  check_keys(j, {"in_channels", "n_classes", "base_channels", "multipliers"}, base);
  NetConfig cfg;
  cfg.in_channels =
      static_cast<std::int32_t>(int_or(j, "in_channels", cfg.in_channels, base));
  cfg.n_classes =
      static_cast<std::int32_t>(int_or(j, "n_classes", cfg.n_classes, base));
  cfg.base_channels =
      static_cast<std::int32_t>(int_or(j, "base_channels", cfg.base_channels, base));
  if (j.contains("multipliers")) {
    const auto& v = j.at("multipliers");
    if (!v.is_array() || v.size() != 3)
      throw ConfigError("expected three integers", ptr(base, "multipliers"));
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number_integer())
        throw ConfigError("expected three integers", ptr(base, "multipliers"));
      cfg.multipliers[i] = static_cast<std::int32_t>(v[i].get<std::int64_t>());
    }
  }
  validate_at(cfg, base);
  return cfg;
}

json train_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["batch"] = cfg.batch;
  j["momentum"] = cfg.momentum;
  return j;
}

TrainConfig train_from_json(const json& j, const std::string& base) {
  expect_object(j, base);
  check_keys(j, {"epochs", "lr", "batch", "momentum"}, base);
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(int_or(j, "epochs", cfg.epochs, base));
  cfg.lr = num_or(j, "lr", cfg.lr, base);
  cfg.batch = static_cast<int>(int_or(j, "batch", cfg.batch, base));
  cfg.momentum = num_or(j, "momentum", cfg.momentum, base);
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0", ptr(base, "epochs"));
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1", ptr(base, "batch"));
  if (!(cfg.lr >= 0.0)) throw ConfigError("lr must be >= 0", ptr(base, "lr"));
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ConfigError("momentum must be in [0,1)", ptr(base, "momentum"));
  return cfg;
}

json spherical_to_json(const SphericalConfig& cfg) {
  json j;
  j["n_layers"] = cfg.n_layers;
  j["n_angles"] = cfg.n_angles;
  j["azimuth_range"] = {cfg.azimuth_range.first, cfg.azimuth_range.second};
  return j;
}

SphericalConfig spherical_from_json(const json& j, const std::string& base) {
  expect_object(j, base);
  check_keys(j, {"n_layers", "n_angles", "azimuth_range"}, base);
  SphericalConfig cfg;
  cfg.n_layers = static_cast<std::int32_t>(int_or(j, "n_layers", cfg.n_layers, base));
  cfg.n_angles = static_cast<std::int32_t>(int_or(j, "n_angles", cfg.n_angles, base));
  cfg.azimuth_range = range_or(j, "azimuth_range", cfg.azimuth_range, base);
  validate_at(cfg, base);
  return cfg;
}

RunConfig run_config_from_json(const json& j) {
  expect_object(j, "");
  check_keys(j,
             {"seed", "grid", "net", "train", "spherical", "data",
              "class_frequencies"},
             "");
  RunConfig cfg;
  const std::int64_t seed = int_or(j, "seed", 1, "");
  if (seed < 0) throw ConfigError("seed must be non-negative", "/seed");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (j.contains("grid")) cfg.grid = grid_from_json(j.at("grid"), "/grid");
  if (j.contains("net")) {
    cfg.net = net_from_json(j.at("net"), "/net");
    if (j.at("net").contains("in_channels") &&
        cfg.net.in_channels != cfg.grid.n_layers)
      throw ConfigError("must equal /grid/n_layers", "/net/in_channels");
  }
  cfg.net.in_channels = cfg.grid.n_layers;
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"), "/train");
  if (j.contains("spherical"))
    cfg.spherical = spherical_from_json(j.at("spherical"), "/spherical");
  if (j.contains("data")) {
    const auto& d = j.at("data");
    expect_object(d, "/data");
    check_keys(d, {"frames_dir", "elev_range"}, "/data");
    if (d.contains("frames_dir")) {
      if (!d.at("frames_dir").is_string())
        throw ConfigError("expected a string", "/data/frames_dir");
      cfg.data.frames_dir = d.at("frames_dir").get<std::string>();
    }
    cfg.data.elev_range = range_or(d, "elev_range", cfg.data.elev_range, "/data");
    if (!(cfg.data.elev_range.second > cfg.data.elev_range.first))
      throw ConfigError("max must exceed min", "/data/elev_range");
  }
  if (j.contains("class_frequencies") && !j.at("class_frequencies").is_null()) {
    const auto& v = j.at("class_frequencies");
    if (!v.is_array())
      throw ConfigError("expected an array of numbers", "/class_frequencies");
    std::vector<double> f;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number())
        throw ConfigError("expected a number",
                          "/class_frequencies/" + std::to_string(i));
      f.push_back(v[i].get<double>());
    }
    if (f.size() != static_cast<std::size_t>(cfg.net.n_classes))
      throw ConfigError("length must equal /net/n_classes", "/class_frequencies");
    cfg.class_frequencies = std::move(f);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

json resolved_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["grid"] = grid_to_json(cfg.grid);
  j["net"] = net_to_json(cfg.net);
  j["train"] = train_to_json(cfg.train);
  j["spherical"] = spherical_to_json(cfg.spherical);
  j["data"] = {{"frames_dir", cfg.data.frames_dir},
               {"elev_range", {cfg.data.elev_range.first, cfg.data.elev_range.second}}};
  if (cfg.class_frequencies)
    j["class_frequencies"] = *cfg.class_frequencies;
  else
    j["class_frequencies"] = nullptr;
  return j;
}

}  // namespace volmap
