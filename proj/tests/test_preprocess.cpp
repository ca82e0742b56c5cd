#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctforge/error.hpp"
#include "ctforge/preprocess.hpp"
#include "ctforge/rng.hpp"
#include "ctforge/spline.hpp"

using namespace ctforge;

namespace {

Cuboid make_cuboid(Vec3i ext, Vec3d spacing = {1, 1, 1}) {
    Cuboid c;
    c.voxels = Grid3(ext.x, ext.y, ext.z);
    c.origin = {0, 0, 0};
    c.parent_spacing = spacing;
    return c;
}

// Smooth band-limited field: a few wide Gaussian blobs on a ramp.
double smooth_field(double x, double y, double z) {
    const double g1 = 600.0 * std::exp(-((x - 20) * (x - 20) + (y - 18) * (y - 18) +
                                         (z - 6) * (z - 6) * 4.0) /
                                       220.0);
    const double g2 = 350.0 * std::exp(-((x - 33) * (x - 33) + (y - 30) * (y - 30) +
                                         (z - 9) * (z - 9) * 4.0) /
                                       300.0);
    return -800.0 + 3.0 * x + 2.0 * y + g1 + g2;
}

double psnr_hu(const Grid3& a, const Grid3& b) {
    REQUIRE(a.dims() == b.dims());
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    const double peak = static_cast<double>(kHuMax - kHuMin);
    return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace

TEST_CASE("constant cuboid rescales to a constant cube") {
    Cuboid c = make_cuboid({46, 46, 13}, {0.7, 0.7, 2.5});
    for (auto& v : c.voxels.data()) v = -600.0;
    PreprocessContext ctx;
    Cube cube = rescale_spline(c, {32, 32, 32}, 3, ctx);
    for (double v : cube.values.data()) CHECK(v == doctest::Approx(-600.0).epsilon(1e-12));
    CHECK(ctx.original_extents == Vec3i{46, 46, 13});
}

TEST_CASE("identity resample reproduces a 32^3 input exactly") {
    Rng rng(3);
    Cuboid c = make_cuboid({32, 32, 32});
    for (auto& v : c.voxels.data()) v = rng.uniform(-1000.0, 400.0);
    for (int order : {1, 3}) {
        PreprocessContext ctx;
        Cube cube = rescale_spline(c, {32, 32, 32}, order, ctx);
        for (std::size_t i = 0; i < cube.values.size(); ++i) {
            REQUIRE(cube.values.data()[i] ==
                    doctest::Approx(c.voxels.data()[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("linear ramp stays a linear ramp through rescale") {
    Cuboid c = make_cuboid({46, 46, 13}, {0.7, 0.7, 2.5});
    for (int z = 0; z < 13; ++z) {
        for (int y = 0; y < 46; ++y) {
            for (int x = 0; x < 46; ++x) {
                c.voxels.at(x, y, z) = -500.0 + 20.0 * x;
            }
        }
    }
    PreprocessContext ctx;
    Cube cube = rescale_spline(c, {32, 32, 32}, 3, ctx);
    // Output index j maps to source x = j * 45 / 31.
    for (int j = 0; j < 32; ++j) {
        const double expected = -500.0 + 20.0 * (j * 45.0 / 31.0);
        const double got = cube.values.at(j, 16, 16);
        CHECK(std::fabs(got - expected) / std::fabs(expected) < 1e-6);
    }
}

TEST_CASE("degenerate extents are rejected") {
    Cuboid c = make_cuboid({32, 32, 1});
    PreprocessContext ctx;
    CHECK_THROWS_AS(rescale_spline(c, {32, 32, 32}, 3, ctx), DegenerateExtent);
}

TEST_CASE("equalize handles constant and two-valued cubes") {
    PreprocessContext ctx;
    Cube constant;
    constant.stage = CubeStage::scaled;
    for (auto& v : constant.values.data()) v = -77.0;
    Cube eq = equalize(constant, ctx);
    CHECK(ctx.eq_degenerate);
    for (double v : eq.values.data()) CHECK(v == -77.0);

    // Two-valued cube keeps order.
    Cube two;
    two.stage = CubeStage::scaled;
    for (std::size_t i = 0; i < two.values.size(); ++i) {
        two.values.data()[i] = (i % 2 == 0) ? -1000.0 : 0.0;
    }
    PreprocessContext ctx2;
    Cube eq2 = equalize(two, ctx2);
    double low = 1e18;
    double high = -1e18;
    for (std::size_t i = 0; i < eq2.values.size(); ++i) {
        if (i % 2 == 0) {
            low = std::max(low == 1e18 ? -1e18 : low, eq2.values.data()[i]);
        } else {
            high = std::min(high == -1e18 ? 1e18 : high, eq2.values.data()[i]);
        }
    }
    // Every former -1000 voxel is below every former 0 voxel.
    double max_low = -1e18;
    double min_high = 1e18;
    for (std::size_t i = 0; i < eq2.values.size(); ++i) {
        if (i % 2 == 0) {
            max_low = std::max(max_low, eq2.values.data()[i]);
        } else {
            min_high = std::min(min_high, eq2.values.data()[i]);
        }
    }
    CHECK(max_low < min_high);
}

TEST_CASE("equalizing uniform noise yields an approximately flat histogram") {
    Rng rng(11);
    Cube cube;
    cube.stage = CubeStage::scaled;
    for (auto& v : cube.values.data()) v = rng.uniform(-1000.0, 400.0);
    PreprocessContext ctx;
    Cube eq = equalize(cube, ctx);

    double lo = 1e18;
    double hi = -1e18;
    for (double v : eq.values.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const int bins = kEqualizeBins;
    std::vector<int> counts(bins, 0);
    for (double v : eq.values.data()) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    const double expected = 32768.0 / bins;
    for (int b = 0; b < bins; ++b) {
        CHECK(std::fabs(counts[static_cast<std::size_t>(b)] - expected) <=
              0.05 * expected);
    }
}

TEST_CASE("inverse equalization is exact on values present in the cube") {
    Rng rng(12);
    Cube cube;
    cube.stage = CubeStage::scaled;
    for (auto& v : cube.values.data()) v = rng.normal(-600.0, 220.0);
    PreprocessContext ctx;
    Cube eq = equalize(cube, ctx);
    for (std::size_t i = 0; i < cube.values.size(); ++i) {
        const double back = ctx.eq.inverse(eq.values.data()[i]);
        CHECK(std::fabs(back - cube.values.data()[i]) < 1e-6);
    }
}

TEST_CASE("normalize maps {0,500,1000} to {-1,0,1}") {
    Cube cube;
    cube.stage = CubeStage::equalized;
    auto& d = cube.values.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = static_cast<double>((i % 3) * 500);  // 0, 500, 1000
    }
    PreprocessContext ctx;
    Cube n = normalize(cube, ctx);
    CHECK(n.values.data()[0] == -1.0);
    CHECK(n.values.data()[1] == 0.0);
    CHECK(n.values.data()[2] == 1.0);
    CHECK(ctx.norm_min == 0.0);
    CHECK(ctx.norm_max == 1000.0);
}

TEST_CASE("normalize endpoints are exact and constants map to zero") {
    Rng rng(13);
    Cube cube;
    cube.stage = CubeStage::equalized;
    for (auto& v : cube.values.data()) v = rng.uniform(-900.0, 300.0);
    PreprocessContext ctx;
    Cube n = normalize(cube, ctx);
    double lo = 1e18;
    double hi = -1e18;
    for (double v : n.values.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == -1.0);
    CHECK(hi == 1.0);

    Cube constant;
    constant.stage = CubeStage::equalized;
    for (auto& v : constant.values.data()) v = 42.0;
    PreprocessContext ctx2;
    Cube n2 = normalize(constant, ctx2);
    CHECK(ctx2.norm_degenerate);
    for (double v : n2.values.data()) CHECK(v == 0.0);
}

TEST_CASE("normalization inverse is exact to 1e-9 relative") {
    Rng rng(14);
    Cuboid c = make_cuboid({40, 40, 20});
    for (auto& v : c.voxels.data()) v = rng.uniform(-1000.0, 400.0);
    PreprocessContext ctx;
    Cube scaled = rescale_spline(c, {32, 32, 32}, 3, ctx);
    Cube eq = equalize(scaled, ctx);
    Cube norm = normalize(eq, ctx);
    const double span = ctx.norm_max - ctx.norm_min;
    for (std::size_t i = 0; i < norm.values.size(); ++i) {
        const double denorm = ctx.norm_min + (norm.values.data()[i] + 1.0) * span / 2.0;
        const double ref = eq.values.data()[i];
        const double rel = std::fabs(denorm - ref) /
                           std::max(1.0, std::fabs(ref));
        CHECK(rel < 1e-9);
    }
}

TEST_CASE("full chain round trip: smooth phantom PSNR >= 40 dB") {
    Cuboid c = make_cuboid({46, 46, 13}, {0.7, 0.7, 2.5});
    for (int z = 0; z < 13; ++z) {
        for (int y = 0; y < 46; ++y) {
            for (int x = 0; x < 46; ++x) {
                c.voxels.at(x, y, z) = smooth_field(x, y, z);
            }
        }
    }
    auto [cube, ctx] = preprocess(c);
    Cuboid back = inverse_preprocess(cube, ctx);
    REQUIRE(back.voxels.dims() == c.voxels.dims());
    CHECK(back.origin == c.origin);
    const double db = psnr_hu(c.voxels, back.voxels);
    INFO("smooth PSNR = " << db);
    CHECK(db >= 40.0);
}

TEST_CASE("full chain round trip: noisy phantom PSNR >= 25 dB") {
    Rng rng(15);
    Cuboid c = make_cuboid({46, 46, 13}, {0.7, 0.7, 2.5});
    for (int z = 0; z < 13; ++z) {
        for (int y = 0; y < 46; ++y) {
            for (int x = 0; x < 46; ++x) {
                c.voxels.at(x, y, z) = smooth_field(x, y, z) + rng.normal(0.0, 50.0);
            }
        }
    }
    auto [cube, ctx] = preprocess(c);
    Cuboid back = inverse_preprocess(cube, ctx);
    const double db = psnr_hu(c.voxels, back.voxels);
    INFO("noisy PSNR = " << db);
    CHECK(db >= 25.0);
}

TEST_CASE("inverse on a degenerate constant context recovers the constant") {
    Cuboid c = make_cuboid({20, 20, 10});
    for (auto& v : c.voxels.data()) v = -333.0;
    auto [cube, ctx] = preprocess(c);
    CHECK(ctx.norm_degenerate);
    for (double v : cube.values.data()) CHECK(v == 0.0);
    Cuboid back = inverse_preprocess(cube, ctx);
    for (double v : back.voxels.data()) CHECK(v == doctest::Approx(-333.0));
}

TEST_CASE("inverse without a complete context errors") {
    Cube cube;
    cube.stage = CubeStage::normalized;
    PreprocessContext empty;
    CHECK_THROWS_AS(inverse_preprocess(cube, empty), MissingContext);

    Cube wrong_stage;
    wrong_stage.stage = CubeStage::scaled;
    CHECK_THROWS_AS(inverse_preprocess(wrong_stage, empty), MissingContext);
}

TEST_CASE("stage preconditions are enforced") {
    Cube scaled;
    scaled.stage = CubeStage::scaled;
    PreprocessContext ctx;
    CHECK_THROWS_AS(normalize(scaled, ctx), Error);
    Cube normd;
    normd.stage = CubeStage::normalized;
    CHECK_THROWS_AS(equalize(normd, ctx), Error);
}
