#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "volmap/geometry.hpp"
#include "volmap/types.hpp"

namespace volmap {

/// Camera-to-LiDAR rigid transform (inverse of the rectified-camera-from-lidar
/// transform a KITTI calib file encodes).
struct Calibration {
    SensorPose cam_to_lidar;
    static Calibration identity() { return {}; }
};

/// One point cloud plus the boxes annotating it, everything in the LiDAR frame.
struct DatasetFrame {
    PointCloud cloud;
    std::vector<OrientedBox3D> boxes;
    std::string frame_id;
};

/// Class-name -> class-id map used when parsing label files. Background is 0.
using ClassMap = std::map<std::string, int32_t>;

/// The five KITTI object classes the pipeline segments: Car, Van, Truck,
/// Pedestrian, Cyclist -> 1..5.
ClassMap kitti_class_map();

struct VelodyneStats {
    std::size_t dropped_nonfinite = 0;
};

/// Reads packed little-endian float32 (x,y,z,intensity) records. File size must
/// be a multiple of 16 bytes. Non-finite records are dropped and counted.
PointCloud read_velodyne_bin(const std::filesystem::path& path,
                             VelodyneStats* stats = nullptr);

/// Inverse of read_velodyne_bin; round-trips well-formed files byte-identically.
void write_velodyne_bin(const PointCloud& cloud, const std::filesystem::path& path);

struct LabelStats {
    std::size_t skipped_unknown = 0;
    std::size_t skipped_dontcare = 0;
};

/// Parses KITTI object labels (type, truncation, occlusion, alpha, 2D bbox,
/// h w l, x y z, ry) and returns LiDAR-frame boxes. The annotated location is
/// the box bottom-center in camera coordinates; the center is lifted by h/2
/// before the calib transform. Unknown class names are skipped and counted;
/// DontCare lines never produce boxes.
std::vector<OrientedBox3D> read_kitti_labels(const std::filesystem::path& path,
                                             const Calibration& calib,
                                             const ClassMap& class_map,
                                             LabelStats* stats = nullptr);

/// Parses a KITTI calib file (R0_rect + Tr_velo_to_cam) into the inverse
/// camera-to-LiDAR transform.
Calibration read_kitti_calib(const std::filesystem::path& path);

/// Vertical field of view of the Velodyne HDL-64E (-24.9 deg .. +2.0 deg),
/// the elevation range used to derive KITTI layer indices.
inline constexpr double kHdl64ElevMin = -0.4353;
inline constexpr double kHdl64ElevMax = 0.0349;

struct LayerBinStats {
    std::size_t origin_points = 0;  // elevation undefined, assigned layer 0
};

/// Assigns layer = clamp(floor((elevation - min) / (max - min) * n_layers),
/// 0, n_layers-1) with elevation = atan2(z, hypot(x,y)). With `passthrough`
/// set, sensor-native layer indices are kept unchanged (and validated against
/// n_layers).
PointCloud layer_binning(const PointCloud& cloud, int n_layers,
                         std::pair<double, double> elev_range,
                         bool passthrough = false,
                         LayerBinStats* stats = nullptr);

/// Keeps only points inside the forward camera frustum of the given full
/// opening angle (default 90 deg), centered on +x.
PointCloud filter_camera_fov(const PointCloud& cloud, double fov_rad = M_PI / 2.0);

using Rgb = std::array<uint8_t, 3>;

/// Distinct colors keyed by class id (or sensor id); kIgnoreLabel maps to gray.
struct Palette {
    std::vector<Rgb> colors;
    static Palette default_palette();
    Rgb color(int32_t id) const;
};

/// ASCII PLY with x y z (float) and red green blue (uchar). Colors keyed by
/// label when the cloud is labeled, else by sensor id.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path,
               const Palette& palette = Palette::default_palette());

/// Pose file: one line per sensor, "id tx ty tz roll pitch yaw" (Z-Y-X Euler).
/// '#' starts a comment. Duplicate ids are rejected.
std::map<int32_t, SensorPose> read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::map<int32_t, SensorPose>& poses,
                     const std::filesystem::path& path);

/// Per-point integer file: one value per line, line i <-> point i of the
/// source .bin. Used for both class labels and native layer indices.
std::vector<int32_t> read_int_column(const std::filesystem::path& path);
void write_int_column(const std::vector<int32_t>& values,
                      const std::filesystem::path& path);

}  // namespace volmap
