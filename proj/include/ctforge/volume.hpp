#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctforge/geometry.hpp"

namespace ctforge {

// CT radiodensity limits. 12-bit scanners produce values in this band and
// everything upstream (serialization, signing) relies on it.
constexpr std::int16_t kHuMin = -1024;
constexpr std::int16_t kHuMax = 3071;

inline std::int16_t clamp_hu(double v) {
    if (v < kHuMin) return kHuMin;
    if (v > kHuMax) return kHuMax;
    return static_cast<std::int16_t>(std::llround(v));
}

// A 3D grid of Hounsfield values with physical voxel spacing in mm.
// Immutable by convention: operations return new volumes.
class Volume {
public:
    Volume() = default;
    // Voxels are clamped to the HU band on construction.
    Volume(Vec3i dims, Vec3d spacing, std::vector<std::int16_t> voxels,
           std::string series_id = {});
    // Constant-filled volume.
    Volume(Vec3i dims, Vec3d spacing, std::int16_t fill,
           std::string series_id = {});

    const Vec3i& dims() const noexcept { return dims_; }
    const Vec3d& spacing() const noexcept { return spacing_; }
    const std::string& series_id() const noexcept { return series_id_; }
    void set_series_id(std::string id) { series_id_ = std::move(id); }

    std::size_t voxel_count() const noexcept { return voxels_.size(); }
    const std::vector<std::int16_t>& voxels() const noexcept { return voxels_; }
    std::vector<std::int16_t>& voxels() noexcept { return voxels_; }

    std::int16_t at(int x, int y, int z) const { return voxels_[index(x, y, z)]; }
    std::int16_t& at(int x, int y, int z) { return voxels_[index(x, y, z)]; }

    std::size_t index(int x, int y, int z) const noexcept {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims_.x) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(z));
    }

    bool contains(Vec3i p) const noexcept {
        return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < dims_.x &&
               p.y < dims_.y && p.z < dims_.z;
    }

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Vec3i dims_{};
    Vec3d spacing_{1.0, 1.0, 1.0};
    std::vector<std::int16_t> voxels_;
    std::string series_id_;
};

// A located sub-region of a Volume. Voxels are held as doubles so the
// tampering chain can carry real-valued intermediates; values are quantized
// back to HU on paste.
struct Cuboid {
    Grid3 voxels;
    Vec3i origin{};        // min-corner voxel index in the parent volume
    Vec3d parent_spacing{1.0, 1.0, 1.0};
};

// Cuts a cuboid with per-axis voxel extent round(target_mm / spacing_axis)
// (round half away from zero), centered on `center` with the min-corner at
// center - extent/2. Throws OutOfBounds if the footprint leaves the volume.
Cuboid cut_cuboid(const Volume& volume, Vec3i center, double target_mm);

// Extent the cut would use, exposed for planning/retry logic.
Vec3i cuboid_extent_for(const Vec3d& spacing, double target_mm);

// Writes the cuboid back; values are clamped to the HU band. Voxels outside
// the footprint are untouched. Throws OutOfBounds if the footprint does not
// fit.
Volume paste_cuboid(const Volume& volume, const Cuboid& cuboid);

// Componentwise coord * spacing.
Vec3d voxel_to_mm(const Volume& volume, Vec3i coord);

}  // namespace ctforge
