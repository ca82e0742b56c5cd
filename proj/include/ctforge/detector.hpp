#pragma once

#include <vector>

#include "ctforge/volume.hpp"

namespace ctforge {

struct DetectedNodule {
    Vec3i center;              // rounded core centroid, voxel coordinates
    double diameter_mm = 0.0;  // equivalent-sphere diameter estimate
    std::size_t voxel_count = 0;  // core voxels backing the estimate
};

struct ThresholdDetectorConfig {
    double hu_threshold = -400.0;
    // Tissue thinner than this is vasculature, not nodule: only voxels at
    // least this deep inside the over-threshold mask seed a detection.
    double core_margin_mm = 2.0;
    // Junctions of crossing vessels can leave a stray core voxel or two;
    // real nodule cores are solid.
    std::size_t min_core_voxels = 6;
    // Anything larger is anatomy (body wall), not a nodule.
    double max_diameter_mm = 40.0;
};

// Threshold nodule detector. Voxels above the HU threshold form the tissue
// mask; an exact Euclidean distance transform strips structures thinner than
// core_margin_mm (vessels), and each remaining 6-connected core becomes one
// detection. For a sphere of radius R the core is exactly the R -
// core_margin ball, so the reported diameter (core equivalent diameter plus
// twice the margin) is unbiased. Components touching the volume border or
// exceeding the size cap are anatomy and are dropped. Results are sorted
// largest first.
std::vector<DetectedNodule> detect_nodules(
    const Volume& volume, const ThresholdDetectorConfig& config = {});

// Squared Euclidean distance (mm^2) from every true voxel to the nearest
// false voxel, treating everything beyond the border as true. Exposed for
// the integrity module and tests.
std::vector<double> squared_distance_to_false(const std::vector<std::uint8_t>& mask,
                                              Vec3i dims, Vec3d spacing);

}  // namespace ctforge
