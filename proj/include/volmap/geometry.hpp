#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "volmap/types.hpp"

namespace volmap {

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Rigid transform from a sensor frame into the ego/reference frame.
struct SensorPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static SensorPose identity() { return {}; }

    /// tx,ty,tz translation plus Z-Y-X Euler angles: R = Rz(yaw)*Ry(pitch)*Rx(roll).
    static SensorPose from_euler_zyx(double tx, double ty, double tz,
                                     double roll, double pitch, double yaw);

    SensorPose inverse() const;

    /// (roll, pitch, yaw) recovering R = Rz(yaw)*Ry(pitch)*Rx(roll).
    Eigen::Vector3d euler_zyx() const;

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }

    /// True iff rotation is orthonormal with determinant +1
    /// (max-norm of R^T R - I below tol).
    bool is_rigid(double tol = 1e-9) const;

    /// Throws Error if is_rigid() fails.
    void validate() const;
};

/// Yaw-only oriented box. dims = (length, width, height) along the box
/// x/y/z axes; yaw rotates the box about the up axis.
struct OrientedBox3D {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d dims = Eigen::Vector3d::Zero();
    double yaw = 0.0;
    int32_t class_id = 0;

    double volume() const { return dims.x() * dims.y() * dims.z(); }

    /// Throws Error unless all dims > 0 and yaw in (-pi, pi].
    void validate() const;
};

/// Applies `pose` to every point: p' = R*p + t. Intensity, layer, sensor_id
/// and labels are untouched. Throws Error on a non-finite input coordinate,
/// naming the offending point index.
PointCloud transform_points(const PointCloud& cloud, const SensorPose& pose);

/// Closed-boundary membership test: the point, expressed in the box frame,
/// must lie within [-dim/2, +dim/2] on all three axes.
bool point_in_box(const Point& p, const OrientedBox3D& box);
bool point_in_box(const Eigen::Vector3d& p, const OrientedBox3D& box);

/// Transforms every cloud into the reference frame and concatenates them.
/// Each input cloud must carry a single sensor_id, unique within the list.
PointCloud fuse(const std::vector<std::pair<PointCloud, SensorPose>>& clouds);

}  // namespace volmap
