#include "volmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "volmap/error.hpp"

namespace volmap {

double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

SensorPose SensorPose::from_euler_zyx(double tx, double ty, double tz,
                                      double roll, double pitch, double yaw) {
    SensorPose pose;
    pose.rotation = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                     Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                     Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
                        .toRotationMatrix();
    pose.translation = Eigen::Vector3d(tx, ty, tz);
    return pose;
}

SensorPose SensorPose::inverse() const {
    SensorPose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

Eigen::Vector3d SensorPose::euler_zyx() const {
    const Eigen::Matrix3d& r = rotation;
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    const double pitch = -std::asin(std::clamp(r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    return {roll, pitch, yaw};
}

bool SensorPose::is_rigid(double tol) const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() >= tol) return false;
    return rotation.determinant() > 0.0;
}

void SensorPose::validate() const {
    if (!is_rigid())
        throw Error("sensor pose rotation is not orthonormal with determinant +1");
}

void OrientedBox3D::validate() const {
    if (!(dims.x() > 0.0 && dims.y() > 0.0 && dims.z() > 0.0))
        throw Error("oriented box has non-positive dimensions");
    if (!(yaw > -M_PI && yaw <= M_PI) || !std::isfinite(yaw))
        throw Error("oriented box yaw outside (-pi, pi]");
}

PointCloud transform_points(const PointCloud& cloud, const SensorPose& pose) {
    pose.validate();
    PointCloud out = cloud;
    const std::size_t n = cloud.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!cloud.finite(i))
            throw Error("non-finite coordinate in input point " + std::to_string(i));
        const Eigen::Vector3d p = pose.apply({cloud.x[i], cloud.y[i], cloud.z[i]});
        out.x[i] = p.x();
        out.y[i] = p.y();
        out.z[i] = p.z();
    }
    return out;
}

bool point_in_box(const Eigen::Vector3d& p, const OrientedBox3D& box) {
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    const Eigen::Vector3d d = p - box.center;
    // Rotate by -yaw into the box frame.
    const double bx = c * d.x() + s * d.y();
    const double by = -s * d.x() + c * d.y();
    const double bz = d.z();
    const Eigen::Vector3d half = box.dims * 0.5;
    return std::abs(bx) <= half.x() && std::abs(by) <= half.y() && std::abs(bz) <= half.z();
}

bool point_in_box(const Point& p, const OrientedBox3D& box) {
    return point_in_box(Eigen::Vector3d(p.x, p.y, p.z), box);
}

PointCloud fuse(const std::vector<std::pair<PointCloud, SensorPose>>& clouds) {
    std::set<int32_t> seen;
    PointCloud fused;
    for (const auto& [cloud, pose] : clouds) {
        if (!cloud.empty()) {
            const int32_t id = cloud.sensor_id.front();
            for (int32_t s : cloud.sensor_id)
                if (s != id)
                    throw Error("cloud carries mixed sensor ids " + std::to_string(id) +
                                " and " + std::to_string(s));
            if (!seen.insert(id).second)
                throw Error("duplicate sensor_id " + std::to_string(id) + " in fuse input");
        }
        fused.append(transform_points(cloud, pose));
    }
    return fused;
}

}  // namespace volmap
