#include "ctforge/tamper.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "ctforge/error.hpp"
#include "ctforge/hash.hpp"
#include "ctforge/phantom.hpp"
#include "ctforge/spline.hpp"

namespace ctforge {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double smoothstep01(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

std::string region_hash(const Volume& v, Vec3i origin, Vec3i extent) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(static_cast<std::size_t>(extent.x) * extent.y * extent.z * 2);
    for (int z = 0; z < extent.z; ++z) {
        for (int y = 0; y < extent.y; ++y) {
            for (int x = 0; x < extent.x; ++x) {
                const auto u = static_cast<std::uint16_t>(
                    v.at(origin.x + x, origin.y + y, origin.z + z));
                bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
                bytes.push_back(static_cast<std::uint8_t>(u >> 8));
            }
        }
    }
    return sha256_hex(bytes);
}

// Equivalent-sphere diameter of the dominant component above -400 HU inside
// the footprint.
double measure_site_diameter(const Volume& v, Vec3i origin, Vec3i extent) {
    std::vector<std::int16_t> voxels(static_cast<std::size_t>(extent.x) *
                                     extent.y * extent.z);
    std::size_t i = 0;
    for (int z = 0; z < extent.z; ++z) {
        for (int y = 0; y < extent.y; ++y) {
            for (int x = 0; x < extent.x; ++x, ++i) {
                voxels[i] = v.at(origin.x + x, origin.y + y, origin.z + z);
            }
        }
    }
    Volume region(extent, v.spacing(), std::move(voxels), "site");
    const auto dets = detect_nodules(region);
    return dets.empty() ? 0.0 : dets[0].diameter_mm;
}

Vec3i clamp_center_to_fit(Vec3i center, Vec3i extent, Vec3i dims) {
    const auto clamp_axis = [](int c, int e, int d) {
        const int lo = e / 2;
        const int hi = d - e + e / 2;
        return std::clamp(c, lo, hi);
    };
    return {clamp_axis(center.x, extent.x, dims.x),
            clamp_axis(center.y, extent.y, dims.y),
            clamp_axis(center.z, extent.z, dims.z)};
}

// Collects up to `count` validated candidates without throwing.
std::vector<Vec3i> locate_up_to(const Volume& volume, const std::string& strategy,
                                int count, std::uint64_t seed) {
    std::vector<Vec3i> out;
    if (strategy == "random-middle") {
        Rng rng(seed);
        const Vec3i d = volume.dims();
        const long attempts_cap = std::max(2000L, 400L * count);
        for (long attempt = 0; attempt < attempts_cap &&
                               static_cast<int>(out.size()) < count;
             ++attempt) {
            const bool left = rng.uniform_int(0, 1) == 0;
            const double fx =
                left ? rng.uniform(0.15, 0.40) : rng.uniform(0.60, 0.85);
            const double fy = rng.uniform(0.35, 0.65);
            const double fz = rng.uniform(0.40, 0.60);
            const Vec3i p{static_cast<int>(std::llround(fx * (d.x - 1))),
                          static_cast<int>(std::llround(fy * (d.y - 1))),
                          static_cast<int>(std::llround(fz * (d.z - 1)))};
            // Lung-density validity: mean HU of the 5^3 neighborhood.
            double mean = 0.0;
            int n = 0;
            for (int dz = -2; dz <= 2; ++dz) {
                for (int dy = -2; dy <= 2; ++dy) {
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int x = std::clamp(p.x + dx, 0, d.x - 1);
                        const int y = std::clamp(p.y + dy, 0, d.y - 1);
                        const int z = std::clamp(p.z + dz, 0, d.z - 1);
                        mean += volume.at(x, y, z);
                        ++n;
                    }
                }
            }
            if (mean / n < -500.0) out.push_back(p);
        }
    } else if (strategy == "detector") {
        for (const auto& det : detect_nodules(volume)) {
            if (static_cast<int>(out.size()) >= count) break;
            out.push_back(det.center);
        }
    } else {
        throw Error("locate_candidates: unknown strategy '" + strategy + "'");
    }
    return out;
}

Cube run_inpainter(const Inpainter& inpainter, const Cube& masked,
                   const PreprocessContext& ctx) {
    Cube out = inpainter(masked, ctx);
    if (out.values.dims() != Vec3i{kCubeEdge, kCubeEdge, kCubeEdge}) {
        throw GeneratorFailure("in-painter returned a non-32^3 cube");
    }
    for (double v : out.values.data()) {
        if (!std::isfinite(v)) {
            throw GeneratorFailure("in-painter produced non-finite output");
        }
    }
    out.stage = CubeStage::normalized;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Record serialization
// ---------------------------------------------------------------------------

std::string TamperRecord::to_text() const {
    std::ostringstream os;
    for (const auto& a : actions) {
        os << "mode=" << a.mode << " center=" << a.center.x << "," << a.center.y
           << "," << a.center.z << " origin=" << a.origin.x << "," << a.origin.y
           << "," << a.origin.z << " extent=" << a.extent.x << "," << a.extent.y
           << "," << a.extent.z << " diameter_mm=" << a.diameter_mm
           << " pre=" << a.pre_hash << " post=" << a.post_hash << "\n";
    }
    return os.str();
}

TamperRecord TamperRecord::from_text(const std::string& text) {
    TamperRecord rec;
    std::istringstream is(text);
    std::string line;
    const auto parse_triplet = [](const std::string& s, Vec3i& out) {
        char c1 = 0;
        char c2 = 0;
        std::istringstream ls(s);
        if (!(ls >> out.x >> c1 >> out.y >> c2 >> out.z) || c1 != ',' ||
            c2 != ',') {
            throw Error("TamperRecord: bad coordinate triplet: " + s);
        }
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        TamperAction a;
        std::istringstream ls(line);
        std::string token;
        while (ls >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) {
                throw Error("TamperRecord: bad token: " + token);
            }
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "mode") {
                a.mode = value;
            } else if (key == "center") {
                parse_triplet(value, a.center);
            } else if (key == "origin") {
                parse_triplet(value, a.origin);
            } else if (key == "extent") {
                parse_triplet(value, a.extent);
            } else if (key == "diameter_mm") {
                a.diameter_mm = std::stod(value);
            } else if (key == "pre") {
                a.pre_hash = value;
            } else if (key == "post") {
                a.post_hash = value;
            } else {
                throw Error("TamperRecord: unknown key: " + key);
            }
        }
        rec.actions.push_back(std::move(a));
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Weighting and merging
// ---------------------------------------------------------------------------

Grid3 gaussian_kernel_01(Vec3i extents) {
    Grid3 g(extents.x, extents.y, extents.z);
    const double cx = (extents.x - 1) / 2.0;
    const double cy = (extents.y - 1) / 2.0;
    const double cz = (extents.z - 1) / 2.0;
    const double sx = extents.x / 4.0;
    const double sy = extents.y / 4.0;
    const double sz = extents.z / 4.0;
    double lo = 1e300;
    double hi = -1e300;
    for (int z = 0; z < extents.z; ++z) {
        for (int y = 0; y < extents.y; ++y) {
            for (int x = 0; x < extents.x; ++x) {
                const double e = (x - cx) * (x - cx) / (2.0 * sx * sx) +
                                 (y - cy) * (y - cy) / (2.0 * sy * sy) +
                                 (z - cz) * (z - cz) / (2.0 * sz * sz);
                const double v = std::exp(-e);
                g.at(x, y, z) = v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (hi > lo) {
        for (double& v : g.data()) v = (v - lo) / (hi - lo);
    } else {
        for (double& v : g.data()) v = 1.0;
    }
    return g;
}

Grid3 compute_weight(const Grid3& x, double alpha, double beta) {
    if (beta <= 0.0) throw Error("compute_weight: beta must be positive");
    const Grid3 kernel = gaussian_kernel_01(x.dims());
    Grid3 w = x;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w.data()[i] =
            sigmoid((x.data()[i] + alpha) / beta) * kernel.data()[i];
    }
    return w;
}

Grid3 merge_cuboids(const Grid3& source, const Grid3& destination, double alpha,
                    double beta) {
    if (source.dims() != destination.dims()) {
        throw ShapeMismatch("merge: extents differ");
    }
    const Grid3 w = compute_weight(source, alpha, beta);
    Grid3 out = destination;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = w.data()[i] * source.data()[i] +
                        (1.0 - w.data()[i]) * destination.data()[i];
    }
    return out;
}

Grid3 merge_for_removal(const Grid3& source, const Grid3& destination,
                        double alpha, double beta) {
    if (source.dims() != destination.dims()) {
        throw ShapeMismatch("merge: extents differ");
    }
    const Grid3 w = compute_weight(destination, alpha, beta);
    Grid3 out = destination;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = w.data()[i] * source.data()[i] +
                        (1.0 - w.data()[i]) * destination.data()[i];
    }
    return out;
}

double estimate_noise_sigma(const Grid3& destination, double hu_ceiling,
                            bool* no_air) {
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t n = 0;
    for (double v : destination.data()) {
        if (v < hu_ceiling) {
            sum += v;
            sum2 += v * v;
            ++n;
        }
    }
    if (n < 2) {
        if (no_air != nullptr) *no_air = true;
        return 0.0;
    }
    if (no_air != nullptr) *no_air = false;
    const double mean = sum / static_cast<double>(n);
    const double var = (sum2 - static_cast<double>(n) * mean * mean) /
                       static_cast<double>(n - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

Grid3 touch_up(const Grid3& source, const Grid3& destination,
               const TamperConfig& config, TamperMode mode, Rng& rng,
               bool* no_air) {
    if (source.dims() != destination.dims()) {
        throw ShapeMismatch("touch_up: extents differ");
    }
    const double sigma =
        estimate_noise_sigma(destination, config.noise_hu_ceiling, no_air);

    Grid3 noised = source;
    if (sigma > 0.0) {
        for (double& v : noised.data()) v += rng.normal(0.0, sigma);
    }
    return mode == TamperMode::inject
               ? merge_cuboids(noised, destination, config.alpha, config.beta)
               : merge_for_removal(noised, destination, config.alpha,
                                   config.beta);
}

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

std::vector<Vec3i> locate_candidates(const Volume& volume,
                                     const std::string& strategy, int count,
                                     std::uint64_t seed) {
    if (count <= 0) throw Error("locate_candidates: count must be positive");
    auto out = locate_up_to(volume, strategy, count, seed);
    if (static_cast<int>(out.size()) < count) {
        throw NoCandidates("locate_candidates: only " +
                           std::to_string(out.size()) + " of " +
                           std::to_string(count) + " candidates found");
    }
    return out;
}

// ---------------------------------------------------------------------------
// In-painters
// ---------------------------------------------------------------------------

double forward_map_hu(double hu, const PreprocessContext& ctx) {
    if (!ctx.have_equalize || !ctx.have_normalize) {
        throw MissingContext("forward_map_hu: incomplete context");
    }
    const double e = ctx.eq_degenerate ? hu : ctx.eq.forward(hu);
    if (ctx.norm_degenerate) return 0.0;
    const double v = 2.0 * (e - ctx.norm_min) / (ctx.norm_max - ctx.norm_min) - 1.0;
    return std::clamp(v, -1.0, 1.0);
}

Inpainter generator_inpainter(const GeneratorParams& params) {
    params.validate();
    return [params](const Cube& masked, const PreprocessContext&) {
        return generator_forward(masked, params, RunMode::eval);
    };
}

Inpainter oracle_inpainter(TamperMode mode, const TamperConfig& config,
                           std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(seed);
    return [mode, config, rng](const Cube& masked,
                               const PreprocessContext& ctx) -> Cube {
        Cube out = masked;
        out.stage = CubeStage::normalized;

        // Shell values provide the texture pool; the air subset matches the
        // parenchyma the mask should blend into.
        std::vector<double> shell;
        std::vector<double> shell_air;
        shell.reserve(32768 - kMaskVoxels);
        const double air_cut = forward_map_hu(-600.0, ctx);
        for (int z = 0; z < kCubeEdge; ++z) {
            for (int y = 0; y < kCubeEdge; ++y) {
                for (int x = 0; x < kCubeEdge; ++x) {
                    if (in_mask(x, y, z)) continue;
                    const double v = masked.values.at(x, y, z);
                    shell.push_back(v);
                    if (v < air_cut) shell_air.push_back(v);
                }
            }
        }
        const std::vector<double>& pool =
            shell_air.size() >= 64 ? shell_air : shell;
        const auto sample_pool = [&]() {
            const auto at = static_cast<std::size_t>(rng->uniform_int(
                0, static_cast<std::int64_t>(pool.size()) - 1));
            return pool[at];
        };

        if (mode == TamperMode::inject) {
            const double dia =
                rng->uniform(config.oracle_diameter_lo, config.oracle_diameter_hi);
            const double radius = dia / 2.0;
            const double tissue = forward_map_hu(config.oracle_tissue_hu, ctx);
            const double c = (kCubeEdge - 1) / 2.0;
            for (int z = kMaskLo; z < kMaskHi; ++z) {
                for (int y = kMaskLo; y < kMaskHi; ++y) {
                    for (int x = kMaskLo; x < kMaskHi; ++x) {
                        const double r = std::sqrt((x - c) * (x - c) +
                                                   (y - c) * (y - c) +
                                                   (z - c) * (z - c));
                        const double cov =
                            1.0 - smoothstep01((r - radius + 1.2) / 2.4);
                        const double bg = sample_pool();
                        const double v = bg * (1.0 - cov) + tissue * cov;
                        out.values.at(x, y, z) = std::clamp(v, -1.0, 1.0);
                    }
                }
            }
        } else {
            for (int z = kMaskLo; z < kMaskHi; ++z) {
                for (int y = kMaskLo; y < kMaskHi; ++y) {
                    for (int x = kMaskLo; x < kMaskHi; ++x) {
                        out.values.at(x, y, z) =
                            std::clamp(sample_pool(), -1.0, 1.0);
                    }
                }
            }
        }
        return out;
    };
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

namespace {

struct SiteTamper {
    Volume volume;
    TamperAction action;
    bool changed = false;
};

// Steps 3-12 for one site: cut, preprocess, mask, in-paint, inverse, touch
// up, paste.
SiteTamper tamper_site(const Volume& volume, Vec3i center,
                       const Inpainter& inpainter, const TamperConfig& config,
                       TamperMode mode, Rng& rng) {
    const Cuboid cuboid = cut_cuboid(volume, center, 32.0);
    auto [cube, ctx] = preprocess(cuboid, config.spline_order);
    const Cube masked = mask_center(cube);
    const Cube x_g = run_inpainter(inpainter, masked, ctx);
    const Cuboid back = inverse_preprocess(x_g, ctx);
    const Grid3 merged =
        touch_up(back.voxels, cuboid.voxels, config, mode, rng, nullptr);

    const Vec3i extent = cuboid.voxels.dims();
    SiteTamper result;
    result.action.center = center;
    result.action.origin = cuboid.origin;
    result.action.extent = extent;
    result.action.pre_hash = region_hash(volume, cuboid.origin, extent);

    Cuboid to_paste;
    to_paste.voxels = merged;
    to_paste.origin = cuboid.origin;
    to_paste.parent_spacing = volume.spacing();
    result.volume = paste_cuboid(volume, to_paste);
    result.action.post_hash = region_hash(result.volume, cuboid.origin, extent);
    result.changed = result.action.pre_hash != result.action.post_hash;
    return result;
}

}  // namespace

TamperResult inject(const Volume& volume, const Inpainter& inpainter,
                    const TamperConfig& config, std::uint64_t seed) {
    if (config.max_injections < 1) {
        throw Error("inject: max_injections must be >= 1");
    }
    Rng rng(seed);
    const auto candidates =
        locate_up_to(volume, config.localization, config.max_injections * 64,
                     rng.next_u64());
    if (candidates.empty()) {
        throw NoCandidates("inject: no injection candidates found");
    }

    TamperResult result;
    result.volume = volume;
    int injected = 0;
    for (const Vec3i& center : candidates) {
        if (injected >= config.max_injections) break;
        SiteTamper site;
        try {
            const Cuboid probe = cut_cuboid(result.volume, center, 32.0);
            // The cuboid must carry some anatomy: the per-cube normalization
            // caps in-painted values at the context maximum, so a pure-air
            // cuboid cannot host visible tissue.
            const double ctx_max = *std::max_element(probe.voxels.data().begin(),
                                                     probe.voxels.data().end());
            if (ctx_max < -300.0) continue;
            // The landing zone must be clear parenchyma: a nodule grown onto
            // the chest wall fuses with it instead of reading as solitary.
            const Vec3i ext = probe.voxels.dims();
            double zone_mean = 0.0;
            int zone_n = 0;
            for (int z = 0; z < ext.z; ++z) {
                for (int y = 0; y < ext.y; ++y) {
                    for (int x = 0; x < ext.x; ++x) {
                        const double fx = (x + 0.5) / ext.x - 0.5;
                        const double fy = (y + 0.5) / ext.y - 0.5;
                        const double fz = (z + 0.5) / ext.z - 0.5;
                                        if (std::fabs(fx) < 0.27 && std::fabs(fy) < 0.27 &&
                            std::fabs(fz) < 0.27) {
                            zone_mean += probe.voxels.at(x, y, z);
                            ++zone_n;
                        }
                    }
                }
            }
            if (zone_n == 0 || zone_mean / zone_n >= -650.0) continue;
            site = tamper_site(result.volume, center, inpainter, config,
                               TamperMode::inject, rng);
        } catch (const OutOfBounds&) {
            continue;
        } catch (const DegenerateExtent&) {
            continue;
        }
        if (!site.changed) continue;
        site.action.mode = "inject";
        site.action.diameter_mm = measure_site_diameter(
            site.volume, site.action.origin, site.action.extent);
        result.volume = std::move(site.volume);
        result.record.actions.push_back(std::move(site.action));
        ++injected;
    }
    if (injected < config.max_injections) {
        throw NoCandidates("inject: only " + std::to_string(injected) + " of " +
                           std::to_string(config.max_injections) +
                           " injections succeeded");
    }
    return result;
}

TamperResult remove_nodules(const Volume& volume, const Inpainter& inpainter,
                            const TamperConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    TamperResult result;
    result.volume = volume;

    for (int iter = 0; iter < config.removal_iteration_cap; ++iter) {
        auto dets = detect_nodules(result.volume);
        dets.erase(std::remove_if(dets.begin(), dets.end(),
                                  [&](const DetectedNodule& d) {
                                      return d.diameter_mm <=
                                             config.removal_diameter_floor_mm;
                                  }),
                   dets.end());
        if (dets.empty()) return result;

        const DetectedNodule target = dets.front();
        const Vec3i extent = cuboid_extent_for(result.volume.spacing(), 32.0);
        const Vec3i center =
            clamp_center_to_fit(target.center, extent, result.volume.dims());
        SiteTamper site;
        try {
            site = tamper_site(result.volume, center, inpainter, config,
                               TamperMode::remove, rng);
        } catch (const DegenerateExtent&) {
            result.iteration_cap_exceeded = true;
            return result;
        }
        site.action.mode = "remove";
        site.action.diameter_mm = target.diameter_mm;
        result.volume = std::move(site.volume);
        result.record.actions.push_back(std::move(site.action));
    }

    // Cap reached; report whether nodules remain.
    auto remaining = detect_nodules(result.volume);
    for (const auto& d : remaining) {
        if (d.diameter_mm > config.removal_diameter_floor_mm) {
            result.iteration_cap_exceeded = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Splice attack
// ---------------------------------------------------------------------------

std::vector<SpliceTemplate> build_template_library(int n,
                                                   const TamperConfig& config,
                                                   std::uint64_t seed) {
    if (n <= 0) throw Error("build_template_library: n must be positive");
    std::vector<SpliceTemplate> out;
    out.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        PhantomConfig pc;
        pc.seed = rng.next_u64();
        pc.series_id = "template-" + std::to_string(i);
        // Scans cut from other sources carry their own noise level.
        pc.lung_hu_sigma = rng.uniform(config.splice_sigma_lo, config.splice_sigma_hi);
        // Nodules grow amid feeding vasculature; template cuts carry the
        // bronchi that get severed by the paste.
        pc.vessels_per_lung = 96;
        Rng site_rng(rng.next_u64());
        const double dia = site_rng.uniform(10.0, 16.0);
        const double hu = site_rng.uniform(-60.0, 0.0);
        const auto lungs = lung_geometry(pc);
        const double min_semi_mm =
            std::min({lungs[0].semi_axes.x * pc.spacing.x,
                      lungs[0].semi_axes.y * pc.spacing.y,
                      lungs[0].semi_axes.z * pc.spacing.z});
        const double margin = (dia / 2.0 + 4.0) / min_semi_mm;
        Vec3i site{};
        for (;;) {
            site = random_lung_site(pc, site_rng, margin);
            const Vec3i ext = cuboid_extent_for(pc.spacing, 32.0);
            const Vec3i origin{site.x - ext.x / 2, site.y - ext.y / 2,
                               site.z - ext.z / 2};
            if (origin.x >= 0 && origin.y >= 0 && origin.z >= 0 &&
                origin.x + ext.x <= pc.dims.x && origin.y + ext.y <= pc.dims.y &&
                origin.z + ext.z <= pc.dims.z) {
                break;
            }
        }
        pc.nodules.push_back({site, dia, hu});
        const Phantom ph = generate_phantom(pc);
        const Cuboid cut = cut_cuboid(ph.volume, site, 32.0);
        SpliceTemplate tmpl;
        tmpl.voxels = cut.voxels;
        tmpl.alpha = compute_weight(cut.voxels, config.alpha, config.beta);
        out.push_back(std::move(tmpl));
    }
    return out;
}

TamperResult splice_attack(const Volume& volume,
                           const std::vector<SpliceTemplate>& library,
                           const TamperConfig& config, std::uint64_t seed) {
    if (library.empty()) throw Error("splice_attack: empty template library");
    Rng rng(seed);
    const auto candidates =
        locate_up_to(volume, config.localization, 16, rng.next_u64());
    if (candidates.empty()) {
        throw NoCandidates("splice_attack: no candidates found");
    }
    const auto& tmpl = library[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(library.size()) - 1))];

    TamperResult result;
    result.volume = volume;
    for (const Vec3i& center : candidates) {
        Cuboid dest;
        try {
            dest = cut_cuboid(volume, center, 32.0);
        } catch (const OutOfBounds&) {
            continue;
        }
        const Vec3i extent = dest.voxels.dims();
        Grid3 voxels = tmpl.voxels;
        Grid3 alpha = tmpl.alpha;
        if (extent != voxels.dims()) {
            voxels = resample_spline(voxels, extent, 1);
            alpha = resample_spline(alpha, extent, 1);
        }
        Grid3 merged = dest.voxels;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            const double a = std::clamp(alpha.data()[i], 0.0, 1.0);
            merged.data()[i] =
                a * voxels.data()[i] + (1.0 - a) * dest.voxels.data()[i];
        }

        TamperAction action;
        action.mode = "splice";
        action.center = center;
        action.origin = dest.origin;
        action.extent = extent;
        action.pre_hash = region_hash(volume, dest.origin, extent);

        Cuboid to_paste;
        to_paste.voxels = std::move(merged);
        to_paste.origin = dest.origin;
        to_paste.parent_spacing = volume.spacing();
        result.volume = paste_cuboid(volume, to_paste);
        action.post_hash = region_hash(result.volume, dest.origin, extent);
        if (action.pre_hash == action.post_hash) {
            // A fully transparent template changes nothing; no action to log.
            return result;
        }
        action.diameter_mm =
            measure_site_diameter(result.volume, action.origin, action.extent);
        result.record.actions.push_back(std::move(action));
        return result;
    }
    throw NoCandidates("splice_attack: no candidate site fit the volume");
}

}  // namespace ctforge
