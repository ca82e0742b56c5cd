#include "ctforge/volume.hpp"

#include <cmath>
#include <string>

#include "ctforge/error.hpp"

namespace ctforge {

namespace {

void validate_geometry(const Vec3i& dims, const Vec3d& spacing) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) {
        throw Error("Volume: dims must be positive");
    }
    const double s[3] = {spacing.x, spacing.y, spacing.z};
    for (double v : s) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw Error("Volume: spacing components must be finite and positive");
        }
    }
}

}  // namespace

Volume::Volume(Vec3i dims, Vec3d spacing, std::vector<std::int16_t> voxels,
               std::string series_id)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)),
      series_id_(std::move(series_id)) {
    validate_geometry(dims_, spacing_);
    const std::size_t expected = static_cast<std::size_t>(dims_.x) * dims_.y * dims_.z;
    if (voxels_.size() != expected) {
        throw Error("Volume: voxel count does not match dims");
    }
    for (auto& v : voxels_) {
        if (v < kHuMin) v = kHuMin;
        if (v > kHuMax) v = kHuMax;
    }
}

Volume::Volume(Vec3i dims, Vec3d spacing, std::int16_t fill, std::string series_id)
    : Volume(dims, spacing,
             std::vector<std::int16_t>(
                 static_cast<std::size_t>(dims.x) * dims.y * dims.z, fill),
             std::move(series_id)) {}

Vec3i cuboid_extent_for(const Vec3d& spacing, double target_mm) {
    if (!(target_mm > 0.0)) throw Error("cut_cuboid: target_mm must be positive");
    // llround is round-half-away-from-zero, the fixed rule for reproducible
    // 32^3 reconstruction.
    return {static_cast<int>(std::llround(target_mm / spacing.x)),
            static_cast<int>(std::llround(target_mm / spacing.y)),
            static_cast<int>(std::llround(target_mm / spacing.z))};
}

Cuboid cut_cuboid(const Volume& volume, Vec3i center, double target_mm) {
    if (!volume.contains(center)) {
        throw OutOfBounds("cut_cuboid: center outside volume");
    }
    const Vec3i ext = cuboid_extent_for(volume.spacing(), target_mm);
    const Vec3i origin{center.x - ext.x / 2, center.y - ext.y / 2,
                       center.z - ext.z / 2};
    if (origin.x < 0 || origin.y < 0 || origin.z < 0 ||
        origin.x + ext.x > volume.dims().x || origin.y + ext.y > volume.dims().y ||
        origin.z + ext.z > volume.dims().z) {
        throw OutOfBounds("cut_cuboid: footprint exceeds volume bounds");
    }

    Cuboid cuboid;
    cuboid.voxels = Grid3(ext.x, ext.y, ext.z);
    cuboid.origin = origin;
    cuboid.parent_spacing = volume.spacing();
    for (int z = 0; z < ext.z; ++z) {
        for (int y = 0; y < ext.y; ++y) {
            for (int x = 0; x < ext.x; ++x) {
                cuboid.voxels.at(x, y, z) =
                    volume.at(origin.x + x, origin.y + y, origin.z + z);
            }
        }
    }
    return cuboid;
}

Volume paste_cuboid(const Volume& volume, const Cuboid& cuboid) {
    const Vec3i ext = cuboid.voxels.dims();
    const Vec3i& o = cuboid.origin;
    if (o.x < 0 || o.y < 0 || o.z < 0 || o.x + ext.x > volume.dims().x ||
        o.y + ext.y > volume.dims().y || o.z + ext.z > volume.dims().z) {
        throw OutOfBounds("paste_cuboid: footprint exceeds volume bounds");
    }
    Volume out = volume;
    for (int z = 0; z < ext.z; ++z) {
        for (int y = 0; y < ext.y; ++y) {
            for (int x = 0; x < ext.x; ++x) {
                out.at(o.x + x, o.y + y, o.z + z) =
                    clamp_hu(cuboid.voxels.at(x, y, z));
            }
        }
    }
    return out;
}

Vec3d voxel_to_mm(const Volume& volume, Vec3i coord) {
    if (!volume.contains(coord)) {
        throw OutOfBounds("voxel_to_mm: coord outside volume");
    }
    return {coord.x * volume.spacing().x, coord.y * volume.spacing().y,
            coord.z * volume.spacing().z};
}

}  // namespace ctforge
