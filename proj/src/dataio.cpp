#include "volmap/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "volmap/error.hpp"

namespace volmap {

namespace {

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return bytes;
}

float read_le_f32(const char* p) {
    uint32_t u = (uint32_t)(uint8_t)p[0] | ((uint32_t)(uint8_t)p[1] << 8) |
                 ((uint32_t)(uint8_t)p[2] << 16) | ((uint32_t)(uint8_t)p[3] << 24);
    return std::bit_cast<float>(u);
}

void write_le_f32(float v, std::ostream& out) {
    const uint32_t u = std::bit_cast<uint32_t>(v);
    const char b[4] = {(char)(u & 0xff), (char)((u >> 8) & 0xff),
                       (char)((u >> 16) & 0xff), (char)((u >> 24) & 0xff)};
    out.write(b, 4);
}

/// Nearest rotation matrix (projection via SVD), det corrected to +1.
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

PointCloud select_points(const PointCloud& cloud, const std::vector<std::size_t>& idx) {
    PointCloud out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        if (cloud.has_labels())
            out.push_back(cloud.point(i), cloud.label[i]);
        else
            out.push_back(cloud.point(i));
    }
    return out;
}

}  // namespace

ClassMap kitti_class_map() {
    return {{"Car", 1}, {"Van", 2}, {"Truck", 3}, {"Pedestrian", 4}, {"Cyclist", 5}};
}

PointCloud read_velodyne_bin(const std::filesystem::path& path, VelodyneStats* stats) {
    const std::vector<char> bytes = read_all_bytes(path);
    if (bytes.size() % 16 != 0)
        throw ParseError(path.string() + ": truncated record at offset " +
                         std::to_string(bytes.size() - bytes.size() % 16));
    PointCloud cloud;
    cloud.reserve(bytes.size() / 16);
    std::size_t dropped = 0;
    for (std::size_t off = 0; off < bytes.size(); off += 16) {
        Point p;
        p.x = read_le_f32(bytes.data() + off);
        p.y = read_le_f32(bytes.data() + off + 4);
        p.z = read_le_f32(bytes.data() + off + 8);
        p.intensity = read_le_f32(bytes.data() + off + 12);
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
            !std::isfinite(p.intensity)) {
            ++dropped;
            continue;
        }
        cloud.push_back(p);
    }
    if (stats) stats->dropped_nonfinite = dropped;
    return cloud;
}

void write_velodyne_bin(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        write_le_f32((float)cloud.x[i], out);
        write_le_f32((float)cloud.y[i], out);
        write_le_f32((float)cloud.z[i], out);
        write_le_f32((float)cloud.intensity[i], out);
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::vector<OrientedBox3D> read_kitti_labels(const std::filesystem::path& path,
                                             const Calibration& calib,
                                             const ClassMap& class_map,
                                             LabelStats* stats) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    calib.cam_to_lidar.validate();

    std::vector<OrientedBox3D> boxes;
    std::string line;
    std::size_t line_no = 0;
    LabelStats local;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string type;
        double trunc, occ, alpha, l2d, t2d, r2d, b2d, h, w, l, x, y, z, ry;
        if (!(ss >> type >> trunc >> occ >> alpha >> l2d >> t2d >> r2d >> b2d >>
              h >> w >> l >> x >> y >> z >> ry))
            throw ParseError(path.string() + ": malformed label line " +
                             std::to_string(line_no));
        if (type == "DontCare") {
            ++local.skipped_dontcare;
            continue;
        }
        const auto it = class_map.find(type);
        if (it == class_map.end()) {
            ++local.skipped_unknown;
            continue;
        }
        // Annotated location is the box bottom-center in camera coordinates
        // (camera y points down); lift by h/2 to the true center.
        const Eigen::Vector3d center_cam(x, y - h / 2.0, z);
        // Length axis in the camera frame after RotY(ry).
        const Eigen::Vector3d axis_cam(std::cos(ry), 0.0, -std::sin(ry));
        const Eigen::Vector3d axis = calib.cam_to_lidar.rotation * axis_cam;
        if (std::abs(axis.z()) > 0.05)
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": box rotation is not yaw-only in the LiDAR frame");
        OrientedBox3D box;
        box.center = calib.cam_to_lidar.apply(center_cam);
        box.dims = Eigen::Vector3d(l, w, h);
        box.yaw = normalize_angle(std::atan2(axis.y(), axis.x()));
        box.class_id = it->second;
        box.validate();
        boxes.push_back(box);
    }
    if (stats) *stats = local;
    return boxes;
}

Calibration read_kitti_calib(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::map<std::string, std::vector<double>> entries;
    std::string line;
    while (std::getline(in, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        std::istringstream ss(line.substr(colon + 1));
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        entries[key] = vals;
    }
    auto find = [&](std::initializer_list<const char*> names,
                    std::size_t count) -> const std::vector<double>* {
        for (const char* n : names) {
            auto it = entries.find(n);
            if (it != entries.end() && it->second.size() >= count) return &it->second;
        }
        return nullptr;
    };
    const auto* rect = find({"R0_rect", "R_rect"}, 9);
    const auto* tr = find({"Tr_velo_to_cam", "Tr"}, 12);
    if (!rect) throw ParseError(path.string() + ": missing R0_rect");
    if (!tr) throw ParseError(path.string() + ": missing Tr_velo_to_cam");

    Eigen::Matrix3d r0;
    r0 << (*rect)[0], (*rect)[1], (*rect)[2], (*rect)[3], (*rect)[4], (*rect)[5],
        (*rect)[6], (*rect)[7], (*rect)[8];
    Eigen::Matrix3d rtr;
    rtr << (*tr)[0], (*tr)[1], (*tr)[2], (*tr)[4], (*tr)[5], (*tr)[6], (*tr)[8],
        (*tr)[9], (*tr)[10];
    const Eigen::Vector3d ttr((*tr)[3], (*tr)[7], (*tr)[11]);

    // cam_from_lidar = R0 * [rtr | ttr]; published matrices carry truncated
    // decimals, so snap the composed rotation back onto SO(3).
    const Eigen::Matrix3d r_cf = nearest_rotation(r0 * rtr);
    const Eigen::Vector3d t_cf = r0 * ttr;

    Calibration calib;
    calib.cam_to_lidar.rotation = r_cf.transpose();
    calib.cam_to_lidar.translation = -(r_cf.transpose() * t_cf);
    calib.cam_to_lidar.validate();
    return calib;
}

PointCloud layer_binning(const PointCloud& cloud, int n_layers,
                         std::pair<double, double> elev_range, bool passthrough,
                         LayerBinStats* stats) {
    if (n_layers < 1) throw Error("layer_binning: n_layers must be >= 1");
    const auto [emin, emax] = elev_range;
    if (!(emin < emax)) throw Error("layer_binning: elevation range min must be < max");

    PointCloud out = cloud;
    if (passthrough) {
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (cloud.layer[i] < 0 || cloud.layer[i] >= n_layers)
                throw Error("layer_binning: native layer " + std::to_string(cloud.layer[i]) +
                            " of point " + std::to_string(i) + " outside [0," +
                            std::to_string(n_layers) + ")");
        return out;
    }

    LayerBinStats local;
    const double span = emax - emin;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.x[i] == 0.0 && cloud.y[i] == 0.0 && cloud.z[i] == 0.0) {
            out.layer[i] = 0;
            ++local.origin_points;
            continue;
        }
        const double elev = std::atan2(cloud.z[i], std::hypot(cloud.x[i], cloud.y[i]));
        const auto bin = (int64_t)std::floor((elev - emin) / span * n_layers);
        out.layer[i] = (int32_t)std::clamp<int64_t>(bin, 0, n_layers - 1);
    }
    if (stats) *stats = local;
    return out;
}

PointCloud filter_camera_fov(const PointCloud& cloud, double fov_rad) {
    std::vector<std::size_t> keep;
    const double half = fov_rad / 2.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.x[i] <= 0.0) continue;
        if (std::abs(std::atan2(cloud.y[i], cloud.x[i])) <= half) keep.push_back(i);
    }
    return select_points(cloud, keep);
}

Palette Palette::default_palette() {
    Palette p;
    p.colors = {
        {70, 70, 90},    // background
        {0, 170, 255},   // 1
        {255, 140, 0},   // 2
        {60, 220, 60},   // 3
        {230, 50, 50},   // 4
        {200, 0, 200},   // 5
        {255, 230, 0},   // 6
        {0, 120, 90},    // 7
        {140, 90, 40},   // 8
        {90, 140, 255},  // 9
        {255, 110, 180}, // 10
        {120, 255, 210}, // 11
        {170, 170, 0},   // 12
        {0, 60, 160},    // 13
        {255, 255, 255}, // 14
        {20, 20, 20},    // 15
    };
    return p;
}

Rgb Palette::color(int32_t id) const {
    if (id == kIgnoreLabel) return {128, 128, 128};
    if (id < 0) return {128, 128, 128};
    return colors[(std::size_t)id % colors.size()];
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path,
               const Palette& palette) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "ply\n"
        << "format ascii 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property uchar red\n"
        << "property uchar green\n"
        << "property uchar blue\n"
        << "end_header\n";
    const bool by_label = cloud.has_labels();
    char buf[128];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Rgb c = palette.color(by_label ? cloud.label[i] : cloud.sensor_id[i]);
        std::snprintf(buf, sizeof(buf), "%.8g %.8g %.8g %u %u %u\n", cloud.x[i],
                      cloud.y[i], cloud.z[i], c[0], c[1], c[2]);
        out << buf;
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::map<int32_t, SensorPose> read_pose_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::map<int32_t, SensorPose> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        int32_t id;
        if (!(ss >> id)) continue;  // blank or comment-only line
        double tx, ty, tz, roll, pitch, yaw;
        if (!(ss >> tx >> ty >> tz >> roll >> pitch >> yaw))
            throw ParseError(path.string() + ": malformed pose line " +
                             std::to_string(line_no));
        if (poses.count(id))
            throw ParseError(path.string() + ": duplicate sensor id " +
                             std::to_string(id) + " at line " + std::to_string(line_no));
        SensorPose pose = SensorPose::from_euler_zyx(tx, ty, tz, roll, pitch, yaw);
        pose.validate();
        poses[id] = pose;
    }
    return poses;
}

void write_pose_file(const std::map<int32_t, SensorPose>& poses,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "# id tx ty tz roll pitch yaw\n";
    char buf[256];
    for (const auto& [id, pose] : poses) {
        const Eigen::Vector3d rpy = pose.euler_zyx();
        std::snprintf(buf, sizeof(buf), "%d %.17g %.17g %.17g %.17g %.17g %.17g\n", id,
                      pose.translation.x(), pose.translation.y(), pose.translation.z(),
                      rpy.x(), rpy.y(), rpy.z());
        out << buf;
    }
    if (!out) throw Error("write failed for " + path.string());
}

std::vector<int32_t> read_int_column(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<int32_t> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            values.push_back(std::stoi(line));
        } catch (const std::exception&) {
            throw ParseError(path.string() + ": malformed integer at line " +
                             std::to_string(line_no));
        }
    }
    return values;
}

void write_int_column(const std::vector<int32_t>& values,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (int32_t v : values) out << v << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace volmap
