#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace volmap {

/// Class id marking points/cells excluded from loss and evaluation
/// (out-of-ROI points, empty grid cells).
inline constexpr int32_t kIgnoreLabel = 255;

/// One LiDAR return. Coordinates are meters in some frame, intensity is
/// unitless reflectance in [0,1], layer is the sensor ring index.
struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double intensity = 0.0;
    int32_t layer = 0;
    int32_t sensor_id = 0;
};

/// Columnar point set. All columns except `label` always have equal length;
/// `label` is either empty (unlabeled cloud) or one class id per point.
struct PointCloud {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> intensity;
    std::vector<int32_t> layer;
    std::vector<int32_t> sensor_id;
    std::vector<int32_t> label;

    std::size_t size() const { return x.size(); }
    bool empty() const { return x.empty(); }
    bool has_labels() const { return !label.empty(); }

    void reserve(std::size_t n) {
        x.reserve(n); y.reserve(n); z.reserve(n);
        intensity.reserve(n); layer.reserve(n); sensor_id.reserve(n);
    }

    void push_back(const Point& p) {
        x.push_back(p.x); y.push_back(p.y); z.push_back(p.z);
        intensity.push_back(p.intensity);
        layer.push_back(p.layer);
        sensor_id.push_back(p.sensor_id);
    }

    void push_back(const Point& p, int32_t lbl) {
        push_back(p);
        label.push_back(lbl);
    }

    Point point(std::size_t i) const {
        return Point{x[i], y[i], z[i], intensity[i], layer[i], sensor_id[i]};
    }

    /// Appends all points of `other`, label column included when both sides agree
    /// on labeledness (appending a labeled cloud to an empty one keeps labels,
    /// appending an empty cloud is a no-op).
    void append(const PointCloud& other) {
        if (other.empty()) return;
        const bool keep_labels = (empty() || has_labels()) && other.has_labels();
        x.insert(x.end(), other.x.begin(), other.x.end());
        y.insert(y.end(), other.y.begin(), other.y.end());
        z.insert(z.end(), other.z.begin(), other.z.end());
        intensity.insert(intensity.end(), other.intensity.begin(), other.intensity.end());
        layer.insert(layer.end(), other.layer.begin(), other.layer.end());
        sensor_id.insert(sensor_id.end(), other.sensor_id.begin(), other.sensor_id.end());
        if (keep_labels)
            label.insert(label.end(), other.label.begin(), other.label.end());
        else
            label.clear();
    }

    bool finite(std::size_t i) const {
        return std::isfinite(x[i]) && std::isfinite(y[i]) && std::isfinite(z[i]);
    }
};

}  // namespace volmap
