#include <doctest.h>

#include <cmath>
#include <set>

#include "ctforge/detector.hpp"
#include "ctforge/error.hpp"
#include "ctforge/phantom.hpp"
#include "ctforge/tamper.hpp"

using namespace ctforge;

namespace {

Phantom clean_phantom(std::uint64_t seed) {
    PhantomConfig cfg;
    cfg.seed = seed;
    return generate_phantom(cfg);
}

Phantom two_nodule_phantom(std::uint64_t seed) {
    PhantomConfig cfg;
    cfg.seed = seed;
    cfg.nodules.push_back({{27, 48, 32}, 12.0, -40.0});
    cfg.nodules.push_back({{69, 48, 32}, 12.0, -30.0});
    return generate_phantom(cfg);
}

// Bit-diff: voxels outside all recorded footprints must be identical.
void check_locality(const Volume& before, const Volume& after,
                    const TamperRecord& record) {
    const Vec3i d = before.dims();
    for (int z = 0; z < d.z; ++z) {
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                bool inside = false;
                for (const auto& a : record.actions) {
                    if (x >= a.origin.x && x < a.origin.x + a.extent.x &&
                        y >= a.origin.y && y < a.origin.y + a.extent.y &&
                        z >= a.origin.z && z < a.origin.z + a.extent.z) {
                        inside = true;
                        break;
                    }
                }
                if (!inside) {
                    REQUIRE(before.at(x, y, z) == after.at(x, y, z));
                }
            }
        }
    }
}

}  // namespace

TEST_CASE("weight is 0.5 at the kernel peak when the voxel value is -alpha") {
    Grid3 x(31, 31, 31, -2000.0);
    x.at(15, 15, 15) = -500.0;
    const Grid3 w = compute_weight(x, 500.0, 70.0);
    CHECK(w.at(15, 15, 15) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("weight saturates at the peak for -alpha + 10*beta") {
    Grid3 x(31, 31, 31, -2000.0);
    x.at(15, 15, 15) = -500.0 + 10.0 * 70.0;
    const Grid3 w = compute_weight(x, 500.0, 70.0);
    CHECK(w.at(15, 15, 15) > 0.9999);
}

TEST_CASE("weights are in [0,1] and decay monotonically from the center") {
    Grid3 x(32, 32, 32, 100.0);  // constant tissue value
    const Grid3 w = compute_weight(x, 500.0, 70.0);
    for (double v : w.data()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    // Along +x from the center, weights never increase.
    double prev = 1e9;
    for (int x_i = 16; x_i < 32; ++x_i) {
        const double v = w.at(x_i, 16, 16);
        REQUIRE(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("merge is a per-voxel convex combination") {
    Rng rng(4);
    Grid3 src(16, 16, 16);
    Grid3 dst(16, 16, 16);
    for (auto& v : src.data()) v = rng.uniform(-1000.0, 400.0);
    for (auto& v : dst.data()) v = rng.uniform(-1000.0, 400.0);
    const Grid3 merged = merge_cuboids(src, dst, 500.0, 70.0);
    for (std::size_t i = 0; i < merged.size(); ++i) {
        const double lo = std::min(src.data()[i], dst.data()[i]);
        const double hi = std::max(src.data()[i], dst.data()[i]);
        REQUIRE(merged.data()[i] >= lo - 1e-9);
        REQUIRE(merged.data()[i] <= hi + 1e-9);
    }
}

TEST_CASE("merge endpoints: saturated source wins the center, corners keep destination") {
    Grid3 src(32, 32, 32, -2000.0);
    Grid3 dst(32, 32, 32, -700.0);
    // Force W=1 at the kernel peak with a huge source value.
    for (int z = 15; z <= 16; ++z) {
        for (int y = 15; y <= 16; ++y) {
            for (int x = 15; x <= 16; ++x) {
                src.at(x, y, z) = 1.0e6;
            }
        }
    }
    const Grid3 merged = merge_cuboids(src, dst, 500.0, 70.0);
    CHECK(merged.at(15, 15, 15) == doctest::Approx(1.0e6));
    // The min-max normalized kernel is exactly zero at its minimum (corner),
    // so the corner keeps the destination exactly.
    CHECK(merged.at(0, 0, 0) == -700.0);
    CHECK(merged.at(31, 31, 31) == -700.0);
}

TEST_CASE("removal merge replaces destination tissue with generated content") {
    Grid3 generated(32, 32, 32, -850.0);  // healthy air
    Grid3 dest(32, 32, 32, -850.0);
    // A tissue blob in the destination center.
    for (int z = 12; z < 20; ++z) {
        for (int y = 12; y < 20; ++y) {
            for (int x = 12; x < 20; ++x) {
                dest.at(x, y, z) = -20.0;
            }
        }
    }
    const Grid3 removed = merge_for_removal(generated, dest, 500.0, 70.0);
    // Center tissue voxel now close to the generated air value.
    CHECK(removed.at(15, 15, 15) < -700.0);
    // Plain merge keyed on the (air) source would be a no-op there.
    const Grid3 noop = merge_cuboids(generated, dest, 500.0, 70.0);
    CHECK(noop.at(15, 15, 15) > -30.0);
    // Far corners keep the original either way.
    CHECK(removed.at(0, 0, 0) == -850.0);
}

TEST_CASE("noise sigma estimate recovers the air noise level") {
    Rng rng(9);
    Grid3 dest(32, 32, 32);
    for (auto& v : dest.data()) v = rng.normal(-850.0, 50.0);
    bool no_air = true;
    const double sigma = estimate_noise_sigma(dest, -600.0, &no_air);
    CHECK_FALSE(no_air);
    CHECK(sigma >= 45.0);
    CHECK(sigma <= 55.0);
}

TEST_CASE("touch_up without air voxels degrades to a plain merge") {
    Grid3 src(16, 16, 16, 100.0);
    Grid3 dst(16, 16, 16, 0.0);  // nothing below -600
    TamperConfig cfg;
    Rng rng(3);
    bool no_air = false;
    const Grid3 out = touch_up(src, dst, cfg, TamperMode::inject, rng, &no_air);
    CHECK(no_air);
    const Grid3 plain = merge_cuboids(src, dst, cfg.alpha, cfg.beta);
    CHECK(out == plain);
}

TEST_CASE("touch_up is bit-identical for a fixed seed") {
    Rng data_rng(5);
    Grid3 src(16, 16, 16);
    Grid3 dst(16, 16, 16);
    for (auto& v : src.data()) v = data_rng.uniform(-900.0, 100.0);
    for (auto& v : dst.data()) v = data_rng.normal(-800.0, 60.0);
    TamperConfig cfg;
    Rng r1(42);
    Rng r2(42);
    const Grid3 a = touch_up(src, dst, cfg, TamperMode::inject, r1);
    const Grid3 b = touch_up(src, dst, cfg, TamperMode::inject, r2);
    CHECK(a == b);
    Rng r3(43);
    const Grid3 c = touch_up(src, dst, cfg, TamperMode::inject, r3);
    CHECK(a != c);
}

TEST_CASE("random-middle candidates sit in lung-density tissue") {
    Phantom ph = clean_phantom(21);
    const auto candidates = locate_candidates(ph.volume, "random-middle", 1000, 7);
    REQUIRE(candidates.size() == 1000);
    int in_lung = 0;
    for (const auto& c : candidates) {
        double mean = 0.0;
        int n = 0;
        for (int dz = -2; dz <= 2; ++dz) {
            for (int dy = -2; dy <= 2; ++dy) {
                for (int dx = -2; dx <= 2; ++dx) {
                    const int x = std::clamp(c.x + dx, 0, ph.volume.dims().x - 1);
                    const int y = std::clamp(c.y + dy, 0, ph.volume.dims().y - 1);
                    const int z = std::clamp(c.z + dz, 0, ph.volume.dims().z - 1);
                    mean += ph.volume.at(x, y, z);
                    ++n;
                }
            }
        }
        if (mean / n < -500.0) ++in_lung;
    }
    CHECK(in_lung >= 990);
}

TEST_CASE("localization is deterministic and fails cleanly without lungs") {
    Phantom ph = clean_phantom(22);
    const auto a = locate_candidates(ph.volume, "random-middle", 20, 5);
    const auto b = locate_candidates(ph.volume, "random-middle", 20, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
    }

    Volume tissue({64, 64, 32}, {1, 1, 1}, std::int16_t(0), "t");
    CHECK_THROWS_AS(locate_candidates(tissue, "random-middle", 1, 1), NoCandidates);
    CHECK_THROWS_AS(locate_candidates(tissue, "no-such-strategy", 1, 1), Error);
}

TEST_CASE("detector strategy returns nodule centers") {
    Phantom ph = two_nodule_phantom(31);
    const auto c = locate_candidates(ph.volume, "detector", 2, 1);
    REQUIRE(c.size() == 2);
    std::set<int> xs = {c[0].x, c[1].x};
    // One candidate per lung nodule.
    bool near_left = false;
    bool near_right = false;
    for (int x : xs) {
        if (std::abs(x - 27) <= 2) near_left = true;
        if (std::abs(x - 69) <= 2) near_right = true;
    }
    CHECK(near_left);
    CHECK(near_right);
}

TEST_CASE("oracle in-painter fills per contract and is deterministic") {
    Phantom ph = clean_phantom(41);
    const auto sites = locate_candidates(ph.volume, "random-middle", 1, 3);
    const Cuboid cut = cut_cuboid(ph.volume, sites[0], 32.0);
    auto [cube, ctx] = preprocess(cut);
    const Cube masked = mask_center(cube);

    TamperConfig cfg;
    auto inject_oracle = oracle_inpainter(TamperMode::inject, cfg, 11);
    const Cube filled = inject_oracle(masked, ctx);
    // Sphere center value within the configured tissue band (in normalized
    // space, via the forward map).
    const double expected = forward_map_hu(cfg.oracle_tissue_hu, ctx);
    CHECK(filled.values.at(15, 15, 15) ==
          doctest::Approx(expected).epsilon(1e-6));

    auto remove_oracle = oracle_inpainter(TamperMode::remove, cfg, 12);
    const Cube cleared = remove_oracle(masked, ctx);
    // Mask statistics within 2 sigma of the surrounding air.
    std::vector<double> shell_air;
    const double air_cut = forward_map_hu(-600.0, ctx);
    for (int z = 0; z < 32; ++z) {
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                if (!in_mask(x, y, z) && masked.values.at(x, y, z) < air_cut) {
                    shell_air.push_back(masked.values.at(x, y, z));
                }
            }
        }
    }
    REQUIRE(shell_air.size() > 100);
    double sh_mean = 0.0;
    for (double v : shell_air) sh_mean += v;
    sh_mean /= static_cast<double>(shell_air.size());
    double sh_var = 0.0;
    for (double v : shell_air) sh_var += (v - sh_mean) * (v - sh_mean);
    sh_var /= static_cast<double>(shell_air.size());
    double mask_mean = 0.0;
    for (int z = 8; z < 24; ++z) {
        for (int y = 8; y < 24; ++y) {
            for (int x = 8; x < 24; ++x) {
                mask_mean += cleared.values.at(x, y, z);
            }
        }
    }
    mask_mean /= 4096.0;
    CHECK(std::fabs(mask_mean - sh_mean) < 2.0 * std::sqrt(sh_var));

    // Deterministic given the seed.
    auto again = oracle_inpainter(TamperMode::inject, cfg, 11);
    const Cube filled2 = again(masked, ctx);
    CHECK(filled.values == filled2.values);
}

TEST_CASE("inject places the configured number of nodules with locality") {
    Phantom ph = clean_phantom(51);
    TamperConfig cfg;
    auto oracle = oracle_inpainter(TamperMode::inject, cfg, 99);
    const TamperResult result = inject(ph.volume, oracle, cfg, 1234);
    CHECK(result.record.actions.size() == 4);
    check_locality(ph.volume, result.volume, result.record);

    // Threshold detector finds at least 4 nodules above 8mm, each matched to
    // a recorded site.
    const auto dets = detect_nodules(result.volume);
    int matched = 0;
    for (const auto& a : result.record.actions) {
        for (const auto& det : dets) {
            if (det.diameter_mm <= 8.0) continue;
            const double dx = (det.center.x - a.center.x);
            const double dy = (det.center.y - a.center.y);
            const double dz = (det.center.z - a.center.z);
            if (std::sqrt(dx * dx + dy * dy + dz * dz) <=
                det.diameter_mm / 2.0) {
                ++matched;
                break;
            }
        }
    }
    CHECK(matched >= 4);

    // Hashes differ per completed action, and diameters were estimated.
    for (const auto& a : result.record.actions) {
        CHECK(a.pre_hash != a.post_hash);
        CHECK(a.diameter_mm > 8.0);
    }
}

TEST_CASE("inject honors max_injections=1 and is seed-deterministic") {
    Phantom ph = clean_phantom(52);
    TamperConfig cfg;
    cfg.max_injections = 1;
    auto oracle = oracle_inpainter(TamperMode::inject, cfg, 5);
    const TamperResult a = inject(ph.volume, oracle, cfg, 777);
    CHECK(a.record.actions.size() == 1);

    auto oracle2 = oracle_inpainter(TamperMode::inject, cfg, 5);
    const TamperResult b = inject(ph.volume, oracle2, cfg, 777);
    CHECK(a.volume == b.volume);
    CHECK(a.record.to_text() == b.record.to_text());
}

TEST_CASE("remove clears a two-nodule phantom") {
    Phantom ph = two_nodule_phantom(61);
    REQUIRE(detect_nodules(ph.volume).size() == 2);
    TamperConfig cfg;
    auto oracle = oracle_inpainter(TamperMode::remove, cfg, 7);
    const TamperResult result = remove_nodules(ph.volume, oracle, cfg, 4321);
    CHECK_FALSE(result.iteration_cap_exceeded);
    CHECK(result.record.actions.size() == 2);
    check_locality(ph.volume, result.volume, result.record);
    for (const auto& det : detect_nodules(result.volume)) {
        CHECK(det.diameter_mm <= 3.0);
    }
}

TEST_CASE("remove on a clean phantom is a no-op") {
    Phantom ph = clean_phantom(62);
    TamperConfig cfg;
    auto oracle = oracle_inpainter(TamperMode::remove, cfg, 7);
    const TamperResult result = remove_nodules(ph.volume, oracle, cfg, 1);
    CHECK(result.record.actions.empty());
    CHECK(result.volume == ph.volume);
    CHECK_FALSE(result.iteration_cap_exceeded);
}

TEST_CASE("a remover that injects trips the iteration cap") {
    Phantom ph = two_nodule_phantom(63);
    TamperConfig cfg;
    // The in-painter keeps producing tissue, so the detector never clears.
    auto bad = oracle_inpainter(TamperMode::inject, cfg, 8);
    const TamperResult result = remove_nodules(ph.volume, bad, cfg, 2);
    CHECK(result.iteration_cap_exceeded);
    CHECK(result.record.actions.size() == 16);
}

TEST_CASE("tamper record round trips through text") {
    TamperRecord rec;
    rec.actions.push_back({"inject", {1, 2, 3}, {4, 5, 6}, {32, 32, 13}, 12.25,
                           "aa11", "bb22"});
    rec.actions.push_back({"remove", {9, 8, 7}, {6, 5, 4}, {46, 46, 13}, 3.5,
                           "cc33", "dd44"});
    const TamperRecord back = TamperRecord::from_text(rec.to_text());
    REQUIRE(back.actions.size() == 2);
    CHECK(back.actions[0].mode == "inject");
    CHECK(back.actions[0].center == Vec3i{1, 2, 3});
    CHECK(back.actions[0].extent == Vec3i{32, 32, 13});
    CHECK(back.actions[0].diameter_mm == doctest::Approx(12.25));
    CHECK(back.actions[1].post_hash == "dd44");
}

TEST_CASE("splice with degenerate alpha channels") {
    Phantom ph = clean_phantom(71);
    TamperConfig cfg;

    SpliceTemplate transparent;
    transparent.voxels = Grid3(32, 32, 32, 0.0);
    transparent.alpha = Grid3(32, 32, 32, 0.0);
    const TamperResult none = splice_attack(ph.volume, {transparent}, cfg, 5);
    CHECK(none.volume == ph.volume);
    CHECK(none.record.actions.empty());

    SpliceTemplate opaque;
    opaque.voxels = Grid3(32, 32, 32, -123.0);
    opaque.alpha = Grid3(32, 32, 32, 1.0);
    const TamperResult full = splice_attack(ph.volume, {opaque}, cfg, 5);
    REQUIRE(full.record.actions.size() == 1);
    const auto& a = full.record.actions[0];
    for (int z = 0; z < a.extent.z; ++z) {
        for (int y = 0; y < a.extent.y; ++y) {
            for (int x = 0; x < a.extent.x; ++x) {
                REQUIRE(full.volume.at(a.origin.x + x, a.origin.y + y,
                                       a.origin.z + z) == -123);
            }
        }
    }
}

TEST_CASE("splice from a template library leaves a detectable nodule") {
    Phantom ph = clean_phantom(72);
    TamperConfig cfg;
    const auto library = build_template_library(3, cfg, 9);
    REQUIRE(library.size() == 3);
    const TamperResult result = splice_attack(ph.volume, library, cfg, 6);
    REQUIRE(result.record.actions.size() == 1);
    check_locality(ph.volume, result.volume, result.record);
    CHECK(result.record.actions[0].diameter_mm > 6.0);
}
