#include "volmap/labeler.hpp"

#include <numeric>
#include <string>

#include "volmap/error.hpp"

namespace volmap {

int64_t ClassStats::total() const {
    return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

PointCloud label_points(const PointCloud& cloud, const std::vector<OrientedBox3D>& boxes) {
    for (const auto& box : boxes) box.validate();
    PointCloud out = cloud;
    out.label.assign(cloud.size(), 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point p = cloud.point(i);
        const OrientedBox3D* best = nullptr;
        for (const auto& box : boxes) {
            if (!point_in_box(p, box)) continue;
            if (!best || box.volume() < best->volume() ||
                (box.volume() == best->volume() && box.class_id < best->class_id))
                best = &box;
        }
        if (best) out.label[i] = best->class_id;
    }
    return out;
}

ClassStats class_frequencies(const std::vector<PointCloud>& clouds, int n_classes) {
    if (n_classes < 1) throw Error("class_frequencies: n_classes must be >= 1");
    ClassStats stats;
    stats.counts.assign(n_classes, 0);
    for (const auto& cloud : clouds) {
        if (!cloud.has_labels() && !cloud.empty())
            throw Error("class_frequencies: unlabeled cloud");
        for (int32_t lbl : cloud.label) {
            if (lbl < 0 || lbl >= n_classes)
                throw Error("class_frequencies: label " + std::to_string(lbl) +
                            " outside [0," + std::to_string(n_classes) + ")");
            ++stats.counts[lbl];
        }
    }
    const int64_t total = stats.total();
    if (total == 0) throw Error("class_frequencies: zero total points");
    stats.frequencies.resize(n_classes);
    for (int c = 0; c < n_classes; ++c)
        stats.frequencies[c] = (double)stats.counts[c] / (double)total;
    return stats;
}

}  // namespace volmap
