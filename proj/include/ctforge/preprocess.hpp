#pragma once

#include <utility>
#include <vector>

#include "ctforge/geometry.hpp"
#include "ctforge/volume.hpp"

namespace ctforge {

constexpr int kCubeEdge = 32;
constexpr int kEqualizeBins = 256;

enum class CubeStage { scaled, equalized, normalized };

// 32x32x32 working unit of the in-painting chain.
struct Cube {
    Grid3 values{kCubeEdge, kCubeEdge, kCubeEdge};
    CubeStage stage = CubeStage::scaled;
};

// Monotone piecewise-linear equalization map: input knots at the cube's
// empirical quantiles (B+1 of them), output knots uniform over [lo, hi].
// Linear interpolation between knots makes the map exactly invertible on
// every value present in the source cube.
struct EqualizationMap {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> knots;  // size kEqualizeBins + 1, non-decreasing

    double forward(double v) const;
    double inverse(double e) const;
    double output_knot(int j) const {
        return lo + (hi - lo) * j / kEqualizeBins;
    }
};

// Everything needed to undo the preprocessing chain. Filled in stages by
// rescale_spline / equalize / normalize.
struct PreprocessContext {
    Vec3i original_extents{};
    Vec3i origin{};
    Vec3d parent_spacing{1.0, 1.0, 1.0};
    int spline_order = 3;
    bool have_rescale = false;

    EqualizationMap eq;
    bool eq_degenerate = false;
    bool have_equalize = false;

    double norm_min = 0.0;
    double norm_max = 0.0;
    bool norm_degenerate = false;
    bool have_normalize = false;
};

// Spline-resamples the cuboid onto a 32^3 grid spanning the same physical
// extent. order must be 1 or 3. Errors with DegenerateExtent if any source
// axis extent is < 2.
Cube rescale_spline(const Cuboid& cuboid, Vec3i target, int order,
                    PreprocessContext& ctx);

// Histogram equalization over all 32768 voxels; output stays within the
// cube's own value range. Constant cubes pass through with the degenerate
// flag set.
Cube equalize(const Cube& cube, PreprocessContext& ctx);

// Affine map to [-1, 1]; min -> -1, max -> +1. Constant cubes map to zero.
Cube normalize(const Cube& cube, PreprocessContext& ctx);

// Inverse normalization, inverse equalization, then spline resampling back
// to the original extents. Requires a complete context and a
// normalized-stage cube; throws MissingContext otherwise.
Cuboid inverse_preprocess(const Cube& cube, const PreprocessContext& ctx);

// Full forward chain: rescale, equalize, normalize.
std::pair<Cube, PreprocessContext> preprocess(const Cuboid& cuboid, int order = 3);

}  // namespace ctforge
