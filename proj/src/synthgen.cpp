#include "volmap/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "volmap/error.hpp"

namespace volmap {

namespace {

constexpr double kRayEps = 1e-9;

void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(msg);
}

// Ray/oriented-box intersection via slab test in the box frame.
// Returns the entry distance, or a negative value on miss.
double intersect_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     const OrientedBox3D& box) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const Eigen::Vector3d rel = origin - box.center;
    // Rotate by -yaw into the box frame.
    const Eigen::Vector3d o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
    const Eigen::Vector3d d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
    const Eigen::Vector3d half = box.dims * 0.5;

    double t0 = kRayEps, t1 = std::numeric_limits<double>::infinity();
    for (int ax = 0; ax < 3; ++ax) {
        if (std::abs(d[ax]) < 1e-12) {
            if (std::abs(o[ax]) > half[ax]) return -1.0;
            continue;
        }
        double ta = (-half[ax] - o[ax]) / d[ax];
        double tb = (half[ax] - o[ax]) / d[ax];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return -1.0;
    }
    return t0;
}

// Hit point clamped a hair inside the box in the box frame, so the returned
// point still satisfies point_in_box after frame round trips.
Eigen::Vector3d box_hit_point(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                              double t, const OrientedBox3D& box) {
    constexpr double kInset = 1e-9;
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    const Eigen::Vector3d rel = origin - box.center;
    const Eigen::Vector3d o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
    const Eigen::Vector3d d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
    const Eigen::Vector3d half = box.dims * 0.5;
    Eigen::Vector3d p = o + t * d;
    for (int ax = 0; ax < 3; ++ax) {
        const double h = std::max(half[ax] - kInset, 0.0);
        p[ax] = std::clamp(p[ax], -h, h);
    }
    return box.center + Eigen::Vector3d(c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z());
}

double base_intensity(int32_t class_id) {
    return 0.2 + 0.15 * static_cast<double>(class_id % 6);
}

}  // namespace

void SceneSpec::validate() const {
    require(!sensors.empty(), "scene has no sensors");
    std::vector<int32_t> ids;
    for (const SensorSpec& s : sensors) {
        require(s.n_layers >= 1, "sensor " + std::to_string(s.id) + " has n_layers < 1");
        require(s.azimuth_fov.second > s.azimuth_fov.first,
                "sensor " + std::to_string(s.id) + " azimuth_fov is empty");
        require(s.azimuth_step > 0.0, "sensor " + std::to_string(s.id) + " azimuth_step <= 0");
        require(s.elev_fov.second > s.elev_fov.first,
                "sensor " + std::to_string(s.id) + " elev_fov is empty");
        require(s.max_range > 0.0, "sensor " + std::to_string(s.id) + " max_range <= 0");
        s.pose.validate();
        ids.push_back(s.id);
    }
    std::sort(ids.begin(), ids.end());
    require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(),
            "duplicate sensor id in scene");
    for (const OrientedBox3D& b : obstacles) {
        require(b.dims.minCoeff() > 0.0, "obstacle with non-positive dimension");
        require(b.class_id >= 1, "obstacle class_id must be >= 1 (0 is background)");
    }
    require(frame_jitter >= 0.0, "frame_jitter < 0");
}

std::vector<SensorFrame> generate(const SceneSpec& spec) {
    spec.validate();
    std::vector<SensorFrame> frames;
    frames.reserve(spec.sensors.size());

    for (std::size_t si = 0; si < spec.sensors.size(); ++si) {
        const SensorSpec& sensor = spec.sensors[si];
        // Per-sensor stream so adding a sensor never disturbs the others.
        std::mt19937_64 gen(spec.seed + 0x9E3779B97F4A7C15ULL * (si + 1));
        auto uniform = [&gen]() {
            return static_cast<double>(gen() >> 11) * 0x1.0p-53;
        };

        const Eigen::Vector3d origin = sensor.pose.translation;
        const SensorPose to_sensor = sensor.pose.inverse();
        const double elev_span = sensor.elev_fov.second - sensor.elev_fov.first;
        const double az_span = sensor.azimuth_fov.second - sensor.azimuth_fov.first;
        const auto n_az = static_cast<std::int64_t>(
            std::floor(az_span / sensor.azimuth_step + kRayEps));

        SensorFrame frame;
        frame.sensor_id = sensor.id;
        frame.pose = sensor.pose;
        PointCloud& cloud = frame.cloud;
        cloud.reserve(static_cast<std::size_t>(sensor.n_layers) * n_az);

        for (int32_t l = 0; l < sensor.n_layers; ++l) {
            const double elev = sensor.elev_fov.first +
                                (l + 0.5) * elev_span / sensor.n_layers;
            for (std::int64_t a = 0; a < n_az; ++a) {
                const double az = sensor.azimuth_fov.first + (a + 0.5) * sensor.azimuth_step;
                const Eigen::Vector3d dir_sensor(std::cos(elev) * std::cos(az),
                                                 std::cos(elev) * std::sin(az),
                                                 std::sin(elev));
                const Eigen::Vector3d dir = sensor.pose.rotation * dir_sensor;

                double best_t = sensor.max_range;
                int best_box = -1;
                for (std::size_t b = 0; b < spec.obstacles.size(); ++b) {
                    const double t = intersect_box(origin, dir, spec.obstacles[b]);
                    if (t > 0.0 && t < best_t) {
                        best_t = t;
                        best_box = static_cast<int>(b);
                    }
                }
                bool hit_ground = false;
                if (best_box < 0 && spec.ground && std::abs(dir.z()) > 1e-12) {
                    const double t = (spec.ground_z - origin.z()) / dir.z();
                    if (t > kRayEps && t < best_t) {
                        best_t = t;
                        hit_ground = true;
                    }
                }
                if (best_box < 0 && !hit_ground) continue;

                Eigen::Vector3d hit;
                int32_t label = 0;
                if (best_box >= 0) {
                    const OrientedBox3D& box = spec.obstacles[static_cast<std::size_t>(best_box)];
                    hit = box_hit_point(origin, dir, best_t, box);
                    label = box.class_id;
                } else {
                    hit = origin + best_t * dir;
                    hit.z() = spec.ground_z;
                }

                const Eigen::Vector3d ps = to_sensor.apply(hit);
                Point p;
                p.x = ps.x();
                p.y = ps.y();
                p.z = ps.z();
                const double noise = (uniform() * 2.0 - 1.0) * 0.05;
                p.intensity = std::clamp(base_intensity(label) + noise, 0.0, 1.0);
                p.layer = l;
                p.sensor_id = sensor.id;
                cloud.push_back(p, label);
            }
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

SceneSpec frame_variant(const SceneSpec& spec, std::int32_t frame_index) {
    require(frame_index >= 0, "frame_index < 0");
    SceneSpec out = spec;
    out.seed = spec.seed + 1000003ULL * (static_cast<std::uint64_t>(frame_index) + 1);
    if (spec.frame_jitter > 0.0) {
        std::mt19937_64 gen(out.seed ^ 0xD1B54A32D192ED03ULL);
        auto uniform = [&gen]() {
            return static_cast<double>(gen() >> 11) * 0x1.0p-53;
        };
        for (OrientedBox3D& b : out.obstacles) {
            b.center.x() += (uniform() * 2.0 - 1.0) * spec.frame_jitter;
            b.center.y() += (uniform() * 2.0 - 1.0) * spec.frame_jitter;
        }
    }
    return out;
}

std::vector<SensorFrame> sensor_subset(const std::vector<SensorFrame>& frames,
                                       const std::vector<std::int32_t>& ids) {
    std::vector<SensorFrame> out;
    for (const SensorFrame& f : frames)
        if (std::find(ids.begin(), ids.end(), f.sensor_id) != ids.end()) out.push_back(f);
    return out;
}

PointCloud fuse_frames(const std::vector<SensorFrame>& frames) {
    std::vector<std::pair<PointCloud, SensorPose>> pairs;
    pairs.reserve(frames.size());
    for (const SensorFrame& f : frames) pairs.emplace_back(f.cloud, f.pose);
    return fuse(pairs);
}

namespace {

using nlohmann::json;

void check_scene_keys(const json& j, const std::vector<std::string>& allowed,
                      const std::string& base) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key", base + "/" + key);
    }
}

double num_or(const json& j, const std::string& key, double fallback, const std::string& base) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError("expected a number", base + "/" + key);
    return j.at(key).get<double>();
}

std::int64_t int_or(const json& j, const std::string& key, std::int64_t fallback,
                    const std::string& base) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError("expected an integer", base + "/" + key);
    return j.at(key).get<std::int64_t>();
}

Eigen::Vector3d vec3_at(const json& j, const std::string& key, const std::string& base) {
    if (!j.contains(key)) throw ConfigError("missing key", base + "/" + key);
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
        !v[2].is_number())
        throw ConfigError("expected [x, y, z]", base + "/" + key);
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

std::pair<double, double> pair_or(const json& j, const std::string& key,
                                  std::pair<double, double> fallback, const std::string& base) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError("expected [min, max]", base + "/" + key);
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

SceneSpec scene_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scene must be a JSON object", "/");
    check_scene_keys(
        j, {"seed", "ground", "ground_z", "frame_jitter", "obstacles", "sensors"}, "");
    SceneSpec spec;
    const std::int64_t seed = int_or(j, "seed", 1, "");
    if (seed < 0) throw ConfigError("seed must be non-negative", "/seed");
    spec.seed = static_cast<std::uint64_t>(seed);
    if (j.contains("ground")) {
        if (!j.at("ground").is_boolean()) throw ConfigError("expected a boolean", "/ground");
        spec.ground = j.at("ground").get<bool>();
    }
    spec.ground_z = num_or(j, "ground_z", spec.ground_z, "");
    spec.frame_jitter = num_or(j, "frame_jitter", spec.frame_jitter, "");

    if (j.contains("obstacles")) {
        if (!j.at("obstacles").is_array()) throw ConfigError("expected an array", "/obstacles");
        std::size_t i = 0;
        for (const json& jb : j.at("obstacles")) {
            const std::string base = "/obstacles/" + std::to_string(i++);
            if (!jb.is_object()) throw ConfigError("expected an object", base);
            check_scene_keys(jb, {"center", "dims", "yaw", "class_id"}, base);
            OrientedBox3D b;
            b.center = vec3_at(jb, "center", base);
            b.dims = vec3_at(jb, "dims", base);
            b.yaw = num_or(jb, "yaw", 0.0, base);
            const std::int64_t cid = int_or(jb, "class_id", -1, base);
            if (cid < 1) throw ConfigError("class_id must be an integer >= 1", base + "/class_id");
            b.class_id = static_cast<int32_t>(cid);
            spec.obstacles.push_back(b);
        }
    }

    if (!j.contains("sensors") || !j.at("sensors").is_array())
        throw ConfigError("expected an array of sensors", "/sensors");
    std::size_t i = 0;
    for (const json& js : j.at("sensors")) {
        const std::string base = "/sensors/" + std::to_string(i++);
        if (!js.is_object()) throw ConfigError("expected an object", base);
        check_scene_keys(js,
                         {"id", "pose", "n_layers", "azimuth_fov", "azimuth_step", "elev_fov",
                          "max_range"},
                         base);
        SensorSpec s;
        const std::int64_t id = int_or(js, "id", -1, base);
        if (id < 0) throw ConfigError("id must be a non-negative integer", base + "/id");
        s.id = static_cast<int32_t>(id);
        if (!js.contains("pose")) throw ConfigError("missing key", base + "/pose");
        const json& jp = js.at("pose");
        if (!jp.is_array() || jp.size() != 6)
            throw ConfigError("expected [tx, ty, tz, roll, pitch, yaw]", base + "/pose");
        for (const json& v : jp)
            if (!v.is_number())
                throw ConfigError("expected [tx, ty, tz, roll, pitch, yaw]", base + "/pose");
        s.pose = SensorPose::from_euler_zyx(jp[0].get<double>(), jp[1].get<double>(),
                                            jp[2].get<double>(), jp[3].get<double>(),
                                            jp[4].get<double>(), jp[5].get<double>());
        s.n_layers = static_cast<int32_t>(int_or(js, "n_layers", s.n_layers, base));
        s.azimuth_fov = pair_or(js, "azimuth_fov", s.azimuth_fov, base);
        s.azimuth_step = num_or(js, "azimuth_step", s.azimuth_step, base);
        s.elev_fov = pair_or(js, "elev_fov", s.elev_fov, base);
        s.max_range = num_or(js, "max_range", s.max_range, base);
        spec.sensors.push_back(s);
    }
    spec.validate();
    return spec;
}

nlohmann::json scene_to_json(const SceneSpec& spec) {
    json j;
    j["seed"] = spec.seed;
    j["ground"] = spec.ground;
    j["ground_z"] = spec.ground_z;
    j["frame_jitter"] = spec.frame_jitter;
    j["obstacles"] = json::array();
    for (const OrientedBox3D& b : spec.obstacles) {
        json jb;
        jb["center"] = {b.center.x(), b.center.y(), b.center.z()};
        jb["dims"] = {b.dims.x(), b.dims.y(), b.dims.z()};
        jb["yaw"] = b.yaw;
        jb["class_id"] = b.class_id;
        j["obstacles"].push_back(jb);
    }
    j["sensors"] = json::array();
    for (const SensorSpec& s : spec.sensors) {
        json js;
        js["id"] = s.id;
        const Eigen::Vector3d e = s.pose.euler_zyx();
        js["pose"] = {s.pose.translation.x(), s.pose.translation.y(), s.pose.translation.z(),
                      e.x(), e.y(), e.z()};
        js["n_layers"] = s.n_layers;
        js["azimuth_fov"] = {s.azimuth_fov.first, s.azimuth_fov.second};
        js["azimuth_step"] = s.azimuth_step;
        js["elev_fov"] = {s.elev_fov.first, s.elev_fov.second};
        js["max_range"] = s.max_range;
        j["sensors"].push_back(js);
    }
    return j;
}

SceneSpec load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scene file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("scene file " + path + " is not valid JSON: " + e.what());
    }
    return scene_from_json(j);
}

}  // namespace volmap
