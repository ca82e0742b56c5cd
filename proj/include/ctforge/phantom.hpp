#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctforge/rng.hpp"
#include "ctforge/volume.hpp"

namespace ctforge {

struct NoduleSpec {
    Vec3i center;        // voxel coordinates
    double diameter_mm = 10.0;
    double hu_mean = -50.0;
};

struct PhantomConfig {
    Vec3i dims{96, 96, 64};
    Vec3d spacing{1.0, 1.0, 1.0};
    double exterior_hu = -1000.0;
    double body_hu = 40.0;
    double lung_hu_mean = -850.0;
    double lung_hu_sigma = 50.0;  // also the volume-wide quantum noise level
    int vessels_per_lung = 32;
    double vessel_hu = 40.0;
    double vessel_radius_mm_lo = 0.7;
    double vessel_radius_mm_hi = 1.3;
    std::vector<NoduleSpec> nodules;
    std::uint64_t seed = 1;
    std::string series_id = "phantom";
};

struct GroundTruthNodule {
    Vec3i center;
    double diameter_mm = 0.0;
    double hu_mean = 0.0;
};

struct Phantom {
    Volume volume;
    std::vector<GroundTruthNodule> truth;
};

// Deterministic synthetic chest phantom: soft-tissue body cylinder, two lung
// ellipsoids of noisy parenchyma, vessels that pierce the lung wall into the
// body, and soft-edged spherical nodules. Throws SpecOutOfBounds when a
// nodule does not fit inside a lung.
Phantom generate_phantom(const PhantomConfig& config);

// Geometry helpers shared with site selection and tests.
struct LungGeometry {
    Vec3d center;     // voxel units
    Vec3d semi_axes;  // voxel units
};
std::vector<LungGeometry> lung_geometry(const PhantomConfig& config);

// A random in-lung voxel with fractional-radius margin, e.g. for nodule
// placement. Margin is in normalized ellipsoid radius units.
Vec3i random_lung_site(const PhantomConfig& config, Rng& rng, double margin);

struct DatasetSample {
    Cuboid cuboid;           // 32 mm cube cut around the site, raw HU
    Vec3i site;              // cut center in the phantom
    double diameter_mm = 0.0;  // ground-truth nodule diameter, 0 for clean
};

enum class DatasetMode { nodules, clean };

// n single-site phantoms, each contributing one training cuboid; nodule
// diameters uniform in [dia_lo, dia_hi] for nodule mode, clean air sites in
// clean mode.
std::vector<DatasetSample> generate_dataset(int n, double dia_lo, double dia_hi,
                                            DatasetMode mode, std::uint64_t seed);

// Ground-truth sidecar: one "x,y,z,diameter_mm" line per nodule.
std::string truth_to_text(const std::vector<GroundTruthNodule>& truth);
std::vector<GroundTruthNodule> truth_from_text(const std::string& text);

}  // namespace ctforge
