#pragma once

#include <cstdint>
#include <vector>

#include "volmap/geometry.hpp"
#include "volmap/types.hpp"

namespace volmap {

/// Per-class point counts over a dataset split and the derived fractions.
/// Frequencies sum to 1 and feed the loss weighting.
struct ClassStats {
    std::vector<int64_t> counts;
    std::vector<double> frequencies;

    int64_t total() const;
};

/// Assigns each point the class of a containing box, background (0) otherwise.
/// A point inside several boxes takes the smallest-volume one; volume ties go
/// to the lower class id.
PointCloud label_points(const PointCloud& cloud, const std::vector<OrientedBox3D>& boxes);

/// Counts labels over all points of all clouds and normalizes. Every label
/// must be < n_classes; an empty point set is an error.
ClassStats class_frequencies(const std::vector<PointCloud>& clouds, int n_classes);

}  // namespace volmap
