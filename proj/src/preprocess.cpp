#include "ctforge/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "ctforge/error.hpp"
#include "ctforge/spline.hpp"

namespace ctforge {

namespace {

constexpr Vec3i kCubeDims{kCubeEdge, kCubeEdge, kCubeEdge};

void require_cube_dims(const Grid3& g) {
    if (g.dims() != kCubeDims) {
        throw ShapeMismatch("cube must be 32x32x32");
    }
}

// Near-constant data must be treated as constant: resampling wobble at the
// 1e-13 level would otherwise be amplified to the full [-1,1] range.
bool effectively_constant(double lo, double hi) {
    const double scale = std::max({1.0, std::fabs(lo), std::fabs(hi)});
    return hi - lo <= 1e-9 * scale;
}

}  // namespace

double EqualizationMap::forward(double v) const {
    const int bins = kEqualizeBins;
    if (knots.empty() || hi <= lo) return v;
    if (v <= knots.front()) return lo;
    if (v >= knots.back()) return hi;
    // Largest knot <= v; ties resolve to the last knot of an equal run, so
    // the active segment always has positive width.
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    const int j = static_cast<int>(it - knots.begin()) - 1;
    const double x0 = knots[static_cast<std::size_t>(j)];
    const double x1 = knots[static_cast<std::size_t>(j) + 1];
    const double y0 = output_knot(j);
    const double y1 = output_knot(j + 1);
    return y0 + (y1 - y0) * (v - x0) / (x1 - x0);
}

double EqualizationMap::inverse(double e) const {
    const int bins = kEqualizeBins;
    if (knots.empty() || hi <= lo) return e;
    if (e <= lo) return knots.front();
    if (e >= hi) return knots.back();
    double t = (e - lo) / (hi - lo) * bins;
    int j = static_cast<int>(std::floor(t));
    j = std::clamp(j, 0, bins - 1);
    // Guard against floating-point landing on the wrong side of a knot.
    while (j > 0 && e < output_knot(j)) --j;
    while (j < bins - 1 && e >= output_knot(j + 1)) ++j;
    const double x0 = knots[static_cast<std::size_t>(j)];
    const double x1 = knots[static_cast<std::size_t>(j) + 1];
    const double y0 = output_knot(j);
    const double y1 = output_knot(j + 1);
    return x0 + (x1 - x0) * (e - y0) / (y1 - y0);
}

Cube rescale_spline(const Cuboid& cuboid, Vec3i target, int order,
                    PreprocessContext& ctx) {
    if (cuboid.voxels.empty()) {
        throw DegenerateExtent("rescale_spline: empty cuboid");
    }
    if (target != kCubeDims) {
        throw ShapeMismatch("rescale_spline: target must be 32x32x32");
    }
    const Vec3i ext = cuboid.voxels.dims();
    if (ext.x < 2 || ext.y < 2 || ext.z < 2) {
        throw DegenerateExtent("rescale_spline: every axis extent must be >= 2");
    }
    Cube cube;
    cube.values = resample_spline(cuboid.voxels, target, order);
    cube.stage = CubeStage::scaled;
    ctx.original_extents = ext;
    ctx.origin = cuboid.origin;
    ctx.parent_spacing = cuboid.parent_spacing;
    ctx.spline_order = order;
    ctx.have_rescale = true;
    return cube;
}

Cube equalize(const Cube& cube, PreprocessContext& ctx) {
    require_cube_dims(cube.values);
    if (cube.stage != CubeStage::scaled) {
        throw Error("equalize: cube must be in the scaled stage");
    }
    const auto& v = cube.values.data();
    const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn_it;
    const double hi = *mx_it;

    Cube out = cube;
    out.stage = CubeStage::equalized;
    if (effectively_constant(lo, hi)) {
        ctx.eq = EqualizationMap{lo, hi, {}};
        ctx.eq_degenerate = true;
        ctx.have_equalize = true;
        return out;
    }

    std::vector<double> sorted(v);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    EqualizationMap map;
    map.lo = lo;
    map.hi = hi;
    map.knots.resize(kEqualizeBins + 1);
    for (int j = 0; j <= kEqualizeBins; ++j) {
        const std::size_t at =
            std::min(n - 1, j * n / static_cast<std::size_t>(kEqualizeBins));
        map.knots[static_cast<std::size_t>(j)] = sorted[at];
    }
    map.knots.front() = lo;
    map.knots.back() = hi;

    for (double& x : out.values.data()) x = map.forward(x);
    ctx.eq = std::move(map);
    ctx.eq_degenerate = false;
    ctx.have_equalize = true;
    return out;
}

Cube normalize(const Cube& cube, PreprocessContext& ctx) {
    require_cube_dims(cube.values);
    if (cube.stage != CubeStage::equalized) {
        throw Error("normalize: cube must be in the equalized stage");
    }
    const auto& v = cube.values.data();
    const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *mn_it;
    const double hi = *mx_it;

    Cube out = cube;
    out.stage = CubeStage::normalized;
    ctx.norm_min = lo;
    ctx.norm_max = hi;
    ctx.have_normalize = true;
    if (effectively_constant(lo, hi)) {
        ctx.norm_degenerate = true;
        std::fill(out.values.data().begin(), out.values.data().end(), 0.0);
        return out;
    }
    ctx.norm_degenerate = false;
    const double span = hi - lo;
    for (double& x : out.values.data()) x = 2.0 * (x - lo) / span - 1.0;
    return out;
}

Cuboid inverse_preprocess(const Cube& cube, const PreprocessContext& ctx) {
    require_cube_dims(cube.values);
    if (cube.stage != CubeStage::normalized) {
        throw MissingContext("inverse_preprocess: cube must be normalized stage");
    }
    if (!ctx.have_rescale || !ctx.have_equalize || !ctx.have_normalize) {
        throw MissingContext("inverse_preprocess: incomplete context");
    }

    Grid3 values = cube.values;
    if (ctx.norm_degenerate) {
        std::fill(values.data().begin(), values.data().end(), ctx.norm_min);
    } else {
        const double span = ctx.norm_max - ctx.norm_min;
        for (double& x : values.data()) {
            x = ctx.norm_min + (x + 1.0) * span / 2.0;
        }
    }
    if (!ctx.eq_degenerate) {
        for (double& x : values.data()) x = ctx.eq.inverse(x);
    }

    Cuboid out;
    out.voxels = resample_spline(values, ctx.original_extents, ctx.spline_order);
    out.origin = ctx.origin;
    out.parent_spacing = ctx.parent_spacing;
    return out;
}

std::pair<Cube, PreprocessContext> preprocess(const Cuboid& cuboid, int order) {
    PreprocessContext ctx;
    Cube cube = rescale_spline(cuboid, kCubeDims, order, ctx);
    cube = equalize(cube, ctx);
    cube = normalize(cube, ctx);
    return {std::move(cube), std::move(ctx)};
}

}  // namespace ctforge
