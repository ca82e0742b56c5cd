#include <doctest.h>

#include "ctforge/error.hpp"
#include "ctforge/rng.hpp"
#include "ctforge/volume.hpp"

using namespace ctforge;

namespace {

Volume random_volume(Vec3i dims, Vec3d spacing, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int16_t> voxels(static_cast<std::size_t>(dims.x) * dims.y *
                                     dims.z);
    for (auto& v : voxels) {
        v = static_cast<std::int16_t>(rng.uniform_int(kHuMin, kHuMax));
    }
    return Volume(dims, spacing, std::move(voxels), "test-series");
}

}  // namespace

TEST_CASE("construction clamps voxels to the HU band") {
    std::vector<std::int16_t> raw = {-5000, 5000, 0, kHuMin, kHuMax, 100, -100, 7};
    Volume v({2, 2, 2}, {1, 1, 1}, raw);
    CHECK(v.at(0, 0, 0) == kHuMin);
    CHECK(v.at(1, 0, 0) == kHuMax);
    CHECK(v.at(0, 1, 0) == 0);
}

TEST_CASE("construction validates geometry") {
    CHECK_THROWS_AS(Volume({0, 2, 2}, {1, 1, 1}, std::int16_t(0)), Error);
    CHECK_THROWS_AS(Volume({2, 2, 2}, {0.0, 1, 1}, std::int16_t(0)), Error);
    CHECK_THROWS_AS(Volume({2, 2, 2}, {-1.0, 1, 1}, std::int16_t(0)), Error);
    std::vector<std::int16_t> wrong(7, 0);
    CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, wrong), Error);
}

TEST_CASE("cut extent follows round-half-away-from-zero per axis") {
    // Unit spacing identity.
    CHECK(cuboid_extent_for({1, 1, 1}, 32.0) == Vec3i{32, 32, 32});
    // Hand calculation: 32/0.7 = 45.714... -> 46, 32/2.5 = 12.8 -> 13.
    CHECK(cuboid_extent_for({0.7, 0.7, 2.5}, 32.0) == Vec3i{46, 46, 13});
    // Half-away: 32/famous .5 cases. 5/2 = 2.5 -> 3.
    CHECK(cuboid_extent_for({2.0, 2.0, 2.0}, 5.0) == Vec3i{3, 3, 3});
}

TEST_CASE("cut_cuboid produces the expected shapes") {
    Volume v = random_volume({64, 64, 32}, {1, 1, 1}, 1);
    Cuboid c = cut_cuboid(v, {32, 32, 16}, 32.0);
    CHECK(c.voxels.dims() == Vec3i{32, 32, 32});
    CHECK(c.origin == Vec3i{16, 16, 0});

    Volume va = random_volume({96, 96, 32}, {0.7, 0.7, 2.5}, 2);
    Cuboid ca = cut_cuboid(va, {48, 48, 16}, 32.0);
    CHECK(ca.voxels.dims() == Vec3i{46, 46, 13});
    CHECK(ca.parent_spacing == Vec3d{0.7, 0.7, 2.5});
}

TEST_CASE("cut at the corner or outside errors") {
    Volume v = random_volume({64, 64, 32}, {1, 1, 1}, 3);
    CHECK_THROWS_AS(cut_cuboid(v, {0, 0, 0}, 32.0), OutOfBounds);
    CHECK_THROWS_AS(cut_cuboid(v, {63, 63, 31}, 8.0), OutOfBounds);
    CHECK_THROWS_AS(cut_cuboid(v, {70, 32, 16}, 8.0), OutOfBounds);
}

TEST_CASE("cut then paste with no modification is the identity") {
    Volume v = random_volume({40, 40, 24}, {0.9, 1.1, 2.0}, 4);
    Cuboid c = cut_cuboid(v, {20, 20, 12}, 16.0);
    Volume v2 = paste_cuboid(v, c);
    CHECK(v2 == v);
}

TEST_CASE("paste changes exactly the footprint") {
    Volume v({64, 64, 40}, {1, 1, 1}, std::int16_t(100), "s");
    Cuboid c = cut_cuboid(v, {32, 32, 20}, 32.0);
    for (auto& x : c.voxels.data()) x = 0.0;
    Volume v2 = paste_cuboid(v, c);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < v.voxel_count(); ++i) {
        if (v.voxels()[i] != v2.voxels()[i]) ++changed;
    }
    CHECK(changed == 32768);

    // Everything outside the footprint is bit-identical.
    for (int z = 0; z < 40; ++z) {
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                const bool inside = x >= c.origin.x && x < c.origin.x + 32 &&
                                    y >= c.origin.y && y < c.origin.y + 32 &&
                                    z >= c.origin.z && z < c.origin.z + 32;
                if (!inside) {
                    REQUIRE(v.at(x, y, z) == v2.at(x, y, z));
                }
            }
        }
    }
}

TEST_CASE("paste clamps out-of-range values") {
    Volume v({8, 8, 8}, {1, 1, 1}, std::int16_t(0), "s");
    Cuboid c = cut_cuboid(v, {4, 4, 4}, 4.0);
    for (auto& x : c.voxels.data()) x = 5000.0;
    Volume v2 = paste_cuboid(v, c);
    CHECK(v2.at(4, 4, 4) == 3071);

    for (auto& x : c.voxels.data()) x = -4000.0;
    Volume v3 = paste_cuboid(v, c);
    CHECK(v3.at(4, 4, 4) == -1024);
}

TEST_CASE("paste out of bounds errors") {
    Volume v({16, 16, 16}, {1, 1, 1}, std::int16_t(0), "s");
    Cuboid c = cut_cuboid(v, {8, 8, 8}, 8.0);
    c.origin = {12, 12, 12};
    CHECK_THROWS_AS(paste_cuboid(v, c), OutOfBounds);
}

TEST_CASE("voxel_to_mm multiplies by spacing") {
    Volume v({16, 16, 16}, {1, 1, 1}, std::int16_t(0), "s");
    CHECK(voxel_to_mm(v, {10, 10, 10}) == Vec3d{10, 10, 10});
    CHECK(voxel_to_mm(v, {0, 0, 0}) == Vec3d{0, 0, 0});

    Volume va({16, 16, 16}, {0.7, 0.7, 2.5}, std::int16_t(0), "s");
    const Vec3d mm = voxel_to_mm(va, {10, 10, 10});
    CHECK(mm.x == doctest::Approx(7.0));
    CHECK(mm.y == doctest::Approx(7.0));
    CHECK(mm.z == doctest::Approx(25.0));

    CHECK_THROWS_AS(voxel_to_mm(v, {16, 0, 0}), OutOfBounds);
}
