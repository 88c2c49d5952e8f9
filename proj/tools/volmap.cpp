// volmap: one binary driving the whole pipeline. Subcommands:
//   gen              synthetic cocoon scenes -> frame directories
//   derive-labels    3D boxes -> per-point label files
//   voxelize         debug grid export for one cloud
//   train            full training loop from a JSON run config
//   infer            cloud -> per-point labels via a trained model
//   eval             per-class IOU report over labeled frames
//   occlusion-report spherical-projection collision diagnostic
//   ablation         per-sensor-subset train/eval report
//
// Every subcommand that writes outputs also writes a fully resolved config
// echo beside them; re-running with the echo reproduces the outputs.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "volmap/dataio.hpp"
#include "volmap/error.hpp"
#include "volmap/geometry.hpp"
#include "volmap/labeler.hpp"
#include "volmap/metrics.hpp"
#include "volmap/runconfig.hpp"
#include "volmap/spherical.hpp"
#include "volmap/synthgen.hpp"
#include "volmap/types.hpp"
#include "volmap/volmapnet.hpp"
#include "volmap/voxelizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace volmap;

namespace {

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

fs::path echo_path(const fs::path& primary_out) {
    return fs::path(primary_out.string() + ".resolved.json");
}

// Sidecar lookup supporting both layouts: <dir>/<stem>.<kind>.txt next to a
// flat .bin, or <dir>/<kind>.txt inside a frame directory.
std::optional<fs::path> find_sidecar(const fs::path& bin_path, const std::string& kind) {
    const fs::path stem_file =
        bin_path.parent_path() / (bin_path.stem().string() + "." + kind + ".txt");
    if (fs::exists(stem_file)) return stem_file;
    const fs::path dir_file = bin_path.parent_path() / (kind + ".txt");
    if (fs::exists(dir_file)) return dir_file;
    return std::nullopt;
}

void attach_column(PointCloud& cloud, std::vector<int32_t>& dst, const fs::path& path) {
    std::vector<int32_t> values = read_int_column(path);
    if (values.size() != cloud.size())
        throw Error(path.string() + " has " + std::to_string(values.size()) +
                    " rows for a cloud of " + std::to_string(cloud.size()) + " points");
    dst = std::move(values);
}

// Loads one cloud plus whatever sidecars exist. Layers come from the sidecar
// when present (validated), otherwise from elevation binning.
PointCloud load_cloud(const fs::path& bin_path, int n_layers,
                      std::pair<double, double> elev_range, bool need_labels) {
    PointCloud cloud = read_velodyne_bin(bin_path);
    const auto layers = find_sidecar(bin_path, "layers");
    if (layers) attach_column(cloud, cloud.layer, *layers);
    cloud = layer_binning(cloud, n_layers, elev_range, layers.has_value());
    if (const auto sensors = find_sidecar(bin_path, "sensors"))
        attach_column(cloud, cloud.sensor_id, *sensors);
    if (const auto labels = find_sidecar(bin_path, "labels"))
        attach_column(cloud, cloud.label, *labels);
    else if (need_labels)
        throw Error("no labels sidecar for " + bin_path.string());
    return cloud;
}

struct LoadedFrame {
    std::string name;
    PointCloud cloud;
};

// A frames directory is either a set of frame_*/points.bin subdirectories (the
// gen layout) or a flat directory of .bin files with sidecars.
std::vector<LoadedFrame> load_frames(const fs::path& dir, int n_layers,
                                     std::pair<double, double> elev_range,
                                     bool need_labels) {
    if (!fs::is_directory(dir)) throw Error(dir.string() + " is not a directory");
    std::vector<fs::path> bins;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("frame_", 0) == 0) {
            const fs::path bin = entry.path() / "points.bin";
            if (!fs::exists(bin)) throw Error("missing " + bin.string());
            bins.push_back(bin);
        }
    }
    if (bins.empty())
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".bin")
                bins.push_back(entry.path());
    if (bins.empty()) throw Error("no frames found in " + dir.string());
    std::sort(bins.begin(), bins.end());

    std::vector<LoadedFrame> frames;
    frames.reserve(bins.size());
    for (const fs::path& bin : bins) {
        LoadedFrame f;
        const fs::path parent = bin.parent_path();
        f.name = bin.filename() == "points.bin" ? parent.filename().string()
                                                : bin.stem().string();
        f.cloud = load_cloud(bin, n_layers, elev_range, need_labels);
        frames.push_back(std::move(f));
    }
    return frames;
}

json iou_to_json(const std::vector<std::optional<double>>& per_class) {
    json arr = json::array();
    for (const auto& v : per_class) {
        if (v)
            arr.push_back(*v);
        else
            arr.push_back(nullptr);
    }
    return arr;
}

json confusion_to_json(const ConfusionMatrix& cm) {
    json rows = json::array();
    for (std::size_t g = 0; g < cm.n_classes; ++g) {
        json row = json::array();
        for (std::size_t p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(g, p));
        rows.push_back(row);
    }
    return rows;
}

GridConfig grid_for_model(const ModelParams& m, const std::optional<RunConfig>& cfg) {
    if (cfg) return cfg->grid;
    if (m.grid) return *m.grid;
    throw Error("model file carries no grid config; pass --config");
}

// ---------------------------------------------------------------- gen

int run_gen(const std::string& scene_path, const std::string& out_dir, int n_frames) {
    const SceneSpec base = load_scene(scene_path);
    const fs::path out(out_dir);
    fs::create_directories(out);
    for (int k = 0; k < n_frames; ++k) {
        const SceneSpec spec_k = frame_variant(base, k);
        const std::vector<SensorFrame> frames = generate(spec_k);
        const PointCloud fused = fuse_frames(frames);

        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d", k);
        const fs::path dir = out / name;
        fs::create_directories(dir);
        write_velodyne_bin(fused, dir / "points.bin");
        write_int_column(fused.label, dir / "labels.txt");
        write_int_column(fused.layer, dir / "layers.txt");
        write_int_column(fused.sensor_id, dir / "sensors.txt");
        std::map<int32_t, SensorPose> poses;
        for (const SensorFrame& f : frames) poses[f.sensor_id] = f.pose;
        write_pose_file(poses, dir / "poses.txt");
        write_json_file(scene_to_json(spec_k), dir / "scene.json");
    }
    write_json_file(scene_to_json(base), out / "scene_resolved.json");
    std::cout << "wrote " << n_frames << " frame(s) to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------- derive-labels

int run_derive_labels(const std::string& frames_dir, const std::string& calib_dir,
                      const std::string& out_dir) {
    const fs::path frames(frames_dir), calib(calib_dir), out(out_dir);
    if (!fs::is_directory(frames)) throw Error(frames_dir + " is not a directory");
    fs::create_directories(out);
    const ClassMap class_map = kitti_class_map();

    std::vector<fs::path> bins;
    for (const auto& entry : fs::directory_iterator(frames))
        if (entry.is_regular_file() && entry.path().extension() == ".bin")
            bins.push_back(entry.path());
    if (bins.empty()) throw Error("no .bin files in " + frames_dir);
    std::sort(bins.begin(), bins.end());

    json processed = json::array();
    std::size_t total_fg = 0;
    for (const fs::path& bin : bins) {
        const std::string stem = bin.stem().string();
        const PointCloud cloud = read_velodyne_bin(bin);
        const Calibration cal = read_kitti_calib(calib / (stem + ".txt"));
        const std::vector<OrientedBox3D> boxes =
            read_kitti_labels(frames / (stem + ".txt"), cal, class_map);
        const PointCloud labeled = label_points(cloud, boxes);
        write_int_column(labeled.label, out / (stem + ".labels.txt"));
        std::size_t fg = 0;
        for (int32_t l : labeled.label)
            if (l > 0) ++fg;
        total_fg += fg;
        processed.push_back({{"frame", stem},
                             {"points", labeled.size()},
                             {"boxes", boxes.size()},
                             {"foreground_points", fg}});
    }

    json echo;
    echo["frames_dir"] = frames_dir;
    echo["calib_dir"] = calib_dir;
    echo["out_dir"] = out_dir;
    echo["class_map"] = json(class_map);
    echo["frames"] = processed;
    write_json_file(echo, out / "resolved_config.json");
    std::cout << "labeled " << bins.size() << " frame(s), " << total_fg
              << " foreground points\n";
    return 0;
}

// ---------------------------------------------------------------- voxelize

int run_voxelize(const std::string& cloud_path, const std::string& config_path,
                 const std::string& dump_path) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const PointCloud cloud =
        load_cloud(cloud_path, cfg.grid.n_layers, cfg.data.elev_range, false);
    const VolGrid grid = voxelize(cloud, cfg.grid);

    json dump;
    dump["shape"] = {cfg.grid.n_layers, cfg.grid.rows(), cfg.grid.cols()};
    dump["origin"] = {cfg.grid.origin_x(), cfg.grid.origin_y()};
    dump["resolution"] = {cfg.grid.res_x, cfg.grid.res_y};
    dump["n_points"] = cloud.size();
    dump["in_roi"] = grid.in_roi_count();
    dump["out_of_roi"] = grid.out_of_roi;
    dump["point_row"] = grid.point_row;
    dump["point_col"] = grid.point_col;
    dump["values"] = grid.values.data;
    write_json_file(dump, dump_path);
    write_json_file(resolved_json(cfg), echo_path(dump_path));
    std::cout << "voxelized " << cloud.size() << " points, " << grid.in_roi_count()
              << " in ROI\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct PreparedData {
    std::vector<TrainSample> samples;
    std::vector<double> frequencies;
    std::vector<double> weights;
};

PreparedData prepare_training_data(const std::vector<LoadedFrame>& frames,
                                   const RunConfig& cfg) {
    PreparedData prep;
    std::vector<PointCloud> clouds;
    clouds.reserve(frames.size());
    for (const LoadedFrame& f : frames) clouds.push_back(f.cloud);

    ClassStats stats;
    if (cfg.class_frequencies) {
        stats.frequencies = *cfg.class_frequencies;
        stats.counts.assign(stats.frequencies.size(), 0);
    } else {
        stats = class_frequencies(clouds, cfg.net.n_classes);
    }
    for (const LoadedFrame& f : frames) {
        const VolGrid grid = voxelize(f.cloud, cfg.grid);
        LabelGrid target = cell_ground_truth(grid, f.cloud, stats);
        prep.samples.push_back(TrainSample{grid.values, std::move(target)});
    }
    prep.frequencies = stats.frequencies;
    prep.weights = nn::class_weights(stats.frequencies);
    return prep;
}

int run_train(const std::string& config_path, const std::string& out_path) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.data.frames_dir.empty())
        throw ConfigError("missing training frames directory", "/data/frames_dir");
    const std::vector<LoadedFrame> frames =
        load_frames(cfg.data.frames_dir, cfg.grid.n_layers, cfg.data.elev_range, true);
    const PreparedData prep = prepare_training_data(frames, cfg);

    TrainLog log;
    ModelParams model =
        train(prep.samples, cfg.net, cfg.train, prep.weights, cfg.seed, &log);
    model.grid = cfg.grid;
    save(model, out_path);
    write_loss_csv(log, out_path + ".loss.csv");

    cfg.class_frequencies = prep.frequencies;  // echo the stats actually used
    write_json_file(resolved_json(cfg), echo_path(out_path));
    std::cout << "trained " << cfg.train.epochs << " epoch(s) on " << frames.size()
              << " frame(s); final loss "
              << (log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back()) << "\n";
    return 0;
}

// ---------------------------------------------------------------- infer

int run_infer(const std::string& model_path, const std::string& cloud_path,
              const std::string& out_path, const std::string& ply_path,
              const std::string& config_path) {
    const ModelParams model = load(model_path);
    std::optional<RunConfig> cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const GridConfig grid = grid_for_model(model, cfg);
    const auto elev_range = cfg ? cfg->data.elev_range
                                : std::pair<double, double>{kHdl64ElevMin, kHdl64ElevMax};

    const PointCloud cloud = load_cloud(cloud_path, grid.n_layers, elev_range, false);
    const PointCloud labeled = infer(cloud, model, grid);
    write_int_column(labeled.label, out_path);
    if (!ply_path.empty()) write_ply(labeled, ply_path);

    json echo;
    echo["model"] = model_path;
    echo["grid"] = grid_to_json(grid);
    echo["net"] = net_to_json(model.config);
    write_json_file(echo, echo_path(out_path));
    std::cout << "labeled " << labeled.size() << " point(s) -> " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& model_path, const std::string& frames_dir,
             const std::string& report_path, int time_runs,
             const std::string& config_path) {
    const ModelParams model = load(model_path);
    std::optional<RunConfig> cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const GridConfig grid = grid_for_model(model, cfg);
    const auto elev_range = cfg ? cfg->data.elev_range
                                : std::pair<double, double>{kHdl64ElevMin, kHdl64ElevMax};

    const std::vector<LoadedFrame> frames =
        load_frames(frames_dir, grid.n_layers, elev_range, true);
    ConfusionMatrix cm(model.config.n_classes);
    json frame_rows = json::array();
    for (const LoadedFrame& f : frames) {
        const PointCloud pred = infer(f.cloud, model, grid);
        ConfusionMatrix frame_cm(model.config.n_classes);
        accumulate(frame_cm, f.cloud, pred);
        cm.merge(frame_cm);
        const auto frame_iou = iou(frame_cm);
        json row;
        row["frame"] = f.name;
        row["points"] = f.cloud.size();
        row["per_class_iou"] = iou_to_json(frame_iou);
        const auto m = mean_iou(frame_iou);
        row["mean_iou"] = m ? json(*m) : json(nullptr);
        frame_rows.push_back(row);
    }

    const auto per_class = iou(cm);
    const auto mean = mean_iou(per_class);
    json report;
    report["n_frames"] = frames.size();
    report["n_points"] = cm.total();
    report["per_class_iou"] = iou_to_json(per_class);
    report["mean_iou"] = mean ? json(*mean) : json(nullptr);
    report["confusion"] = confusion_to_json(cm);
    report["pred_ignored"] = cm.pred_ignored;
    report["frames"] = frame_rows;
    if (time_runs > 0) {
        const TimingReport t =
            time_inference(frames.front().cloud, model, grid, 2, time_runs);
        report["timing"] = {{"mean_ms", t.mean_ms},   {"p50_ms", t.p50_ms},
                            {"p95_ms", t.p95_ms},     {"n_warmup", t.n_warmup},
                            {"n_runs", t.n_runs},     {"grid_shape", t.grid_shape},
                            {"threads", t.threads}};
    }
    write_json_file(report, report_path);

    json echo;
    echo["model"] = model_path;
    echo["frames_dir"] = frames_dir;
    echo["grid"] = grid_to_json(grid);
    echo["net"] = net_to_json(model.config);
    echo["time_runs"] = time_runs;
    write_json_file(echo, echo_path(report_path));
    std::cout << "eval over " << frames.size() << " frame(s): mean IOU "
              << (mean ? std::to_string(*mean) : std::string("n/a")) << "\n";
    return 0;
}

// ---------------------------------------------------------------- occlusion-report

int run_occlusion(const std::string& frames_dir, const std::string& poses_path,
                  const std::string& config_path, const std::string& report_path) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    const std::vector<LoadedFrame> frames = load_frames(
        frames_dir, cfg.spherical.n_layers, cfg.data.elev_range, false);

    json frame_rows = json::array();
    std::size_t total_points = 0, total_in_range = 0, total_collisions = 0;
    std::map<std::pair<int32_t, int32_t>, std::size_t> pair_totals;
    for (const LoadedFrame& f : frames) {
        const OcclusionReport rep = occlusion_report(f.cloud, cfg.spherical);
        json pairs = json::array();
        for (const auto& [key, count] : rep.pair_collisions) {
            pairs.push_back({{"sensors", {key.first, key.second}}, {"collisions", count}});
            pair_totals[key] += count;
        }
        frame_rows.push_back({{"frame", f.name},
                              {"total_points", rep.total_points},
                              {"in_range", rep.in_range},
                              {"collisions", rep.collisions},
                              {"collision_rate", rep.collision_rate},
                              {"pair_collisions", pairs}});
        total_points += rep.total_points;
        total_in_range += rep.in_range;
        total_collisions += rep.collisions;
    }

    json report;
    report["frames"] = frame_rows;
    report["total_points"] = total_points;
    report["in_range"] = total_in_range;
    report["collisions"] = total_collisions;
    report["collision_rate"] =
        total_in_range == 0 ? 0.0
                            : static_cast<double>(total_collisions) /
                                  static_cast<double>(total_in_range);
    json pairs = json::array();
    for (const auto& [key, count] : pair_totals)
        pairs.push_back({{"sensors", {key.first, key.second}}, {"collisions", count}});
    report["pair_collisions"] = pairs;
    if (!poses_path.empty()) {
        const auto poses = read_pose_file(poses_path);
        json jp = json::array();
        for (const auto& [id, pose] : poses) {
            const Eigen::Vector3d rpy = pose.euler_zyx();
            jp.push_back({{"id", id},
                          {"translation",
                           {pose.translation.x(), pose.translation.y(), pose.translation.z()}},
                          {"rpy", {rpy.x(), rpy.y(), rpy.z()}}});
        }
        report["poses"] = jp;
    }
    report["config"] = resolved_json(cfg);

    if (report_path.empty()) {
        std::cout << report.dump(2) << "\n";
    } else {
        write_json_file(report, report_path);
        write_json_file(resolved_json(cfg), echo_path(report_path));
        std::cout << "collision rate "
                  << json(report["collision_rate"]).dump() << " -> " << report_path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- ablation

std::vector<std::vector<int32_t>> parse_subsets(const std::string& text,
                                                const std::vector<int32_t>& all_ids,
                                                std::vector<std::string>& names) {
    std::vector<std::vector<int32_t>> subsets;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, ';')) {
        if (token.empty()) continue;
        names.push_back(token);
        if (token == "ALL" || token == "all") {
            subsets.push_back(all_ids);
            continue;
        }
        std::vector<int32_t> ids;
        std::istringstream items(token);
        std::string item;
        while (std::getline(items, item, ',')) {
            std::size_t pos = item.find_first_not_of(" \t");
            if (pos == std::string::npos) throw Error("empty sensor in subset " + token);
            item = item.substr(pos, item.find_last_not_of(" \t") - pos + 1);
            if (!item.empty() && (item[0] == 'S' || item[0] == 's')) item = item.substr(1);
            try {
                ids.push_back(std::stoi(item));
            } catch (const std::exception&) {
                throw Error("cannot parse sensor id '" + item + "' in subset " + token);
            }
        }
        if (ids.empty()) throw Error("empty subset in --subsets");
        subsets.push_back(ids);
    }
    if (subsets.empty()) throw Error("--subsets parsed to nothing");
    return subsets;
}

RunConfig ablation_defaults(const SceneSpec& scene) {
    RunConfig cfg;
    cfg.seed = scene.seed;
    cfg.grid.x_range = {-12.8, 12.8};
    cfg.grid.y_range = {-12.8, 12.8};
    cfg.grid.res_x = cfg.grid.res_y = 0.4;
    int32_t max_layers = 1;
    for (const SensorSpec& s : scene.sensors) max_layers = std::max(max_layers, s.n_layers);
    cfg.grid.n_layers = max_layers;
    int32_t max_class = 0;
    for (const OrientedBox3D& b : scene.obstacles) max_class = std::max(max_class, b.class_id);
    cfg.net.n_classes = max_class + 1;
    cfg.net.base_channels = 8;
    cfg.net.in_channels = cfg.grid.n_layers;
    cfg.train.epochs = 60;
    cfg.train.lr = 1e-3;
    cfg.train.batch = 4;
    cfg.train.momentum = 0.9;
    return cfg;
}

int run_ablation(const std::string& scene_path, const std::string& subsets_text,
                 const std::string& report_path, const std::string& config_path,
                 int n_frames) {
    const SceneSpec base = load_scene(scene_path);
    RunConfig cfg =
        config_path.empty() ? ablation_defaults(base) : load_run_config(config_path);
    if (cfg.net.in_channels != cfg.grid.n_layers)
        throw ConfigError("must equal /grid/n_layers", "/net/in_channels");

    std::vector<int32_t> all_ids;
    for (const SensorSpec& s : base.sensors) all_ids.push_back(s.id);
    std::sort(all_ids.begin(), all_ids.end());
    std::vector<std::string> names;
    const std::vector<std::vector<int32_t>> subsets =
        parse_subsets(subsets_text, all_ids, names);

    // One generation pass shared by every subset, so per-subset clouds are
    // true restrictions of the same scenes.
    std::vector<SceneSpec> variants;
    std::vector<std::vector<SensorFrame>> all_frames;
    for (int k = 0; k < n_frames; ++k) {
        variants.push_back(frame_variant(base, k));
        all_frames.push_back(generate(variants.back()));
    }

    json rows = json::array();
    for (std::size_t si = 0; si < subsets.size(); ++si) {
        std::vector<LoadedFrame> frames;
        std::vector<std::int64_t> object_points(base.obstacles.size(), 0);
        for (int k = 0; k < n_frames; ++k) {
            LoadedFrame f;
            f.name = "frame_" + std::to_string(k);
            f.cloud = fuse_frames(sensor_subset(all_frames[k], subsets[si]));
            for (std::size_t b = 0; b < variants[k].obstacles.size(); ++b) {
                const OrientedBox3D& box = variants[k].obstacles[b];
                for (std::size_t i = 0; i < f.cloud.size(); ++i)
                    if (point_in_box(f.cloud.point(i), box)) ++object_points[b];
            }
            frames.push_back(std::move(f));
        }

        const PreparedData prep = prepare_training_data(frames, cfg);
        TrainLog log;
        ModelParams model =
            train(prep.samples, cfg.net, cfg.train, prep.weights, cfg.seed, &log);
        model.grid = cfg.grid;

        ConfusionMatrix cm(cfg.net.n_classes);
        std::size_t n_points = 0;
        for (const LoadedFrame& f : frames) {
            const PointCloud pred = infer(f.cloud, model, cfg.grid);
            accumulate(cm, f.cloud, pred);
            n_points += f.cloud.size();
        }
        const auto per_class = iou(cm);
        const auto mean = mean_iou(per_class);

        json row;
        row["name"] = names[si];
        row["sensors"] = subsets[si];
        row["n_points"] = n_points;
        row["per_object_points"] = object_points;
        row["per_class_iou"] = iou_to_json(per_class);
        row["mean_iou"] = mean ? json(*mean) : json(nullptr);
        row["final_loss"] = log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back();
        rows.push_back(row);
        std::cout << "subset " << names[si] << ": mean IOU "
                  << (mean ? std::to_string(*mean) : std::string("n/a")) << "\n";
    }

    json report;
    report["scene"] = scene_to_json(base);
    report["config"] = resolved_json(cfg);
    report["n_frames"] = n_frames;
    report["rows"] = rows;
    write_json_file(report, report_path);
    write_json_file(resolved_json(cfg), echo_path(report_path));
    std::cout << "wrote " << rows.size() << "-row ablation report to " << report_path
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VolMap: volumetric BEV semantic segmentation for fused LiDAR cocoons"};
    app.require_subcommand(1);

    std::string scene_path, out_path, config_path, cloud_path, dump_path;
    std::string model_path, ply_path, frames_dir, calib_dir, report_path, poses_path;
    std::string subsets_text = "ALL";
    int n_frames = 1;
    int time_runs = 0;

    CLI::App* gen = app.add_subcommand("gen", "Generate synthetic cocoon frames");
    gen->add_option("--scene", scene_path, "Scene spec JSON")->required();
    gen->add_option("--out", out_path, "Output directory")->required();
    gen->add_option("--frames", n_frames, "Number of frames (seeded variants)")
        ->default_val(1);

    CLI::App* derive = app.add_subcommand(
        "derive-labels", "Derive per-point labels from 3D boxes (KITTI layout)");
    derive->add_option("--frames", frames_dir, "Directory of .bin clouds and .txt box labels")
        ->required();
    derive->add_option("--calib", calib_dir, "Directory of per-frame calib files")->required();
    derive->add_option("--out", out_path, "Output directory for .labels.txt files")
        ->required();

    CLI::App* vox = app.add_subcommand("voxelize", "Export the grid for one cloud");
    vox->add_option("--cloud", cloud_path, "Input .bin cloud")->required();
    vox->add_option("--config", config_path, "Run config JSON (defaults if omitted)");
    vox->add_option("--dump", dump_path, "Output JSON path")->required();

    CLI::App* trn = app.add_subcommand("train", "Train a model from a run config");
    trn->add_option("--config", config_path, "Run config JSON")->required();
    trn->add_option("--out", out_path, "Output model path (.vmp)")->required();

    CLI::App* inf = app.add_subcommand("infer", "Label one cloud with a trained model");
    inf->add_option("--model", model_path, "Model file (.vmp)")->required();
    inf->add_option("--cloud", cloud_path, "Input .bin cloud")->required();
    inf->add_option("--out", out_path, "Output label file")->required();
    inf->add_option("--ply", ply_path, "Optional colored PLY export");
    inf->add_option("--config", config_path, "Run config overriding the model's grid");

    CLI::App* evl = app.add_subcommand("eval", "Per-class IOU over labeled frames");
    evl->add_option("--model", model_path, "Model file (.vmp)")->required();
    evl->add_option("--frames", frames_dir, "Directory of labeled frames")->required();
    evl->add_option("--report", report_path, "Output report JSON")->required();
    evl->add_option("--time", time_runs, "Also time inference over N runs")->default_val(0);
    evl->add_option("--config", config_path, "Run config overriding the model's grid");

    CLI::App* occ = app.add_subcommand("occlusion-report",
                                       "Spherical-projection collision diagnostic");
    occ->add_option("--frames", frames_dir, "Directory of fused frames")->required();
    occ->add_option("--poses", poses_path, "Sensor pose file echoed into the report");
    occ->add_option("--config", config_path, "Run config (spherical section)");
    occ->add_option("--report", report_path, "Output JSON (stdout if omitted)");

    CLI::App* abl = app.add_subcommand("ablation",
                                       "Train/eval one model per sensor subset");
    abl->add_option("--scene", scene_path, "Scene spec JSON")->required();
    abl->add_option("--subsets", subsets_text, "Semicolon-separated subsets, e.g. "
                                               "\"S1;S5;S1,S5;ALL\"")
        ->required();
    abl->add_option("--report", report_path, "Output report JSON")->required();
    abl->add_option("--config", config_path, "Run config (synthetic defaults if omitted)");
    abl->add_option("--frames", n_frames, "Frames per subset")->default_val(2);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return run_gen(scene_path, out_path, n_frames);
        if (*derive) return run_derive_labels(frames_dir, calib_dir, out_path);
        if (*vox) return run_voxelize(cloud_path, config_path, dump_path);
        if (*trn) return run_train(config_path, out_path);
        if (*inf) return run_infer(model_path, cloud_path, out_path, ply_path, config_path);
        if (*evl) return run_eval(model_path, frames_dir, report_path, time_runs, config_path);
        if (*occ) return run_occlusion(frames_dir, poses_path, config_path, report_path);
        if (*abl)
            return run_ablation(scene_path, subsets_text, report_path, config_path, n_frames);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
