#include "ctforge/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctforge/error.hpp"

namespace ctforge {

namespace {

constexpr double kEdgeMm = 1.2;  // soft-boundary half width

double smoothstep01(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// 1 deep inside (d << 0), 0 outside; d is a signed distance in mm.
double coverage(double d_mm, double edge_mm = kEdgeMm) {
    return 1.0 - smoothstep01((d_mm + edge_mm) / (2.0 * edge_mm));
}

struct Capsule {
    Vec3d a;  // endpoints, voxel units
    Vec3d b;
    double radius_mm;
};

double segment_distance_mm(const Vec3d& p_mm, const Vec3d& a_mm,
                           const Vec3d& b_mm) {
    const double abx = b_mm.x - a_mm.x;
    const double aby = b_mm.y - a_mm.y;
    const double abz = b_mm.z - a_mm.z;
    const double apx = p_mm.x - a_mm.x;
    const double apy = p_mm.y - a_mm.y;
    const double apz = p_mm.z - a_mm.z;
    const double len2 = abx * abx + aby * aby + abz * abz;
    double t = len2 > 0.0 ? (apx * abx + apy * aby + apz * abz) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = apx - t * abx;
    const double dy = apy - t * aby;
    const double dz = apz - t * abz;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double ellipsoid_radius(const Vec3d& p, const LungGeometry& lung) {
    const double nx = (p.x - lung.center.x) / lung.semi_axes.x;
    const double ny = (p.y - lung.center.y) / lung.semi_axes.y;
    const double nz = (p.z - lung.center.z) / lung.semi_axes.z;
    return std::sqrt(nx * nx + ny * ny + nz * nz);
}

Vec3d random_unit_vector(Rng& rng) {
    for (;;) {
        const double x = rng.normal();
        const double y = rng.normal();
        const double z = rng.normal();
        const double n = std::sqrt(x * x + y * y + z * z);
        if (n > 1e-6) return {x / n, y / n, z / n};
    }
}

}  // namespace

std::vector<LungGeometry> lung_geometry(const PhantomConfig& config) {
    const double X = config.dims.x;
    const double Y = config.dims.y;
    const double Z = config.dims.z;
    const Vec3d semi{0.14 * X, 0.23 * Y, 0.44 * Z};
    return {
        {{0.28 * X, 0.50 * Y, 0.50 * Z}, semi},
        {{0.72 * X, 0.50 * Y, 0.50 * Z}, semi},
    };
}

Vec3i random_lung_site(const PhantomConfig& config, Rng& rng, double margin) {
    const auto lungs = lung_geometry(config);
    const double rmax = 1.0 - margin;
    if (rmax <= 0.0) throw SpecOutOfBounds("random_lung_site: margin too large");
    for (int attempt = 0; attempt < 4096; ++attempt) {
        const auto& lung =
            lungs[static_cast<std::size_t>(rng.uniform_int(0, 1))];
        const double ux = rng.uniform(-rmax, rmax);
        const double uy = rng.uniform(-rmax, rmax);
        const double uz = rng.uniform(-rmax, rmax);
        if (ux * ux + uy * uy + uz * uz > rmax * rmax) continue;
        const Vec3i site{
            static_cast<int>(std::llround(lung.center.x + ux * lung.semi_axes.x)),
            static_cast<int>(std::llround(lung.center.y + uy * lung.semi_axes.y)),
            static_cast<int>(std::llround(lung.center.z + uz * lung.semi_axes.z))};
        if (site.x >= 0 && site.y >= 0 && site.z >= 0 && site.x < config.dims.x &&
            site.y < config.dims.y && site.z < config.dims.z) {
            return site;
        }
    }
    throw SpecOutOfBounds("random_lung_site: could not place a site");
}

Phantom generate_phantom(const PhantomConfig& config) {
    if (config.dims.x < 16 || config.dims.y < 16 || config.dims.z < 8) {
        throw SpecOutOfBounds("generate_phantom: dims too small");
    }
    const auto lungs = lung_geometry(config);
    const Vec3d sp = config.spacing;
    const double min_semi_mm =
        std::min({lungs[0].semi_axes.x * sp.x, lungs[0].semi_axes.y * sp.y,
                  lungs[0].semi_axes.z * sp.z});

    // Validate nodules against the lung interiors.
    for (const auto& n : config.nodules) {
        if (n.diameter_mm <= 0.0) {
            throw SpecOutOfBounds("generate_phantom: nodule diameter must be > 0");
        }
        const Vec3d p{static_cast<double>(n.center.x),
                      static_cast<double>(n.center.y),
                      static_cast<double>(n.center.z)};
        bool fits = false;
        for (const auto& lung : lungs) {
            const double r = ellipsoid_radius(p, lung);
            const double margin =
                (n.diameter_mm / 2.0 + 2.0 * kEdgeMm) / min_semi_mm;
            if (r + margin <= 1.0) fits = true;
        }
        if (!fits) {
            throw SpecOutOfBounds("generate_phantom: nodule does not fit inside a lung");
        }
    }

    Rng rng(config.seed);

    // Vessel chords: start inside the lung, extend both ways until outside
    // the ellipsoid, then overshoot into the body wall so vessels stay
    // connected to soft tissue.
    std::vector<Capsule> vessels;
    for (const auto& lung : lungs) {
        for (int i = 0; i < config.vessels_per_lung; ++i) {
            Vec3d start;
            for (;;) {
                const double ux = rng.uniform(-0.8, 0.8);
                const double uy = rng.uniform(-0.8, 0.8);
                const double uz = rng.uniform(-0.8, 0.8);
                if (ux * ux + uy * uy + uz * uz > 0.64) continue;
                start = {lung.center.x + ux * lung.semi_axes.x,
                         lung.center.y + uy * lung.semi_axes.y,
                         lung.center.z + uz * lung.semi_axes.z};
                break;
            }
            const Vec3d dir = random_unit_vector(rng);
            const auto march = [&](double sign) {
                Vec3d p = start;
                double t = 0.0;
                while (ellipsoid_radius(p, lung) < 1.0 && t < 256.0) {
                    t += 0.5;
                    p = {start.x + sign * t * dir.x, start.y + sign * t * dir.y,
                         start.z + sign * t * dir.z};
                }
                const double overshoot = 4.0;  // mm into the wall
                t += overshoot / std::min({sp.x, sp.y, sp.z});
                return Vec3d{start.x + sign * t * dir.x,
                             start.y + sign * t * dir.y,
                             start.z + sign * t * dir.z};
            };
            Capsule c;
            c.a = march(1.0);
            c.b = march(-1.0);
            c.radius_mm =
                rng.uniform(config.vessel_radius_mm_lo, config.vessel_radius_mm_hi);
            vessels.push_back(c);
        }
    }

    const double X = config.dims.x;
    const double Y = config.dims.y;
    // The body fills nearly the whole cross-section so any cuboid cut at a
    // valid in-lung site stays inside soft tissue rather than exterior air.
    const double body_ax = 0.48 * X * sp.x;
    const double body_ay = 0.46 * Y * sp.y;
    const double body_cx = 0.5 * X;
    const double body_cy = 0.5 * Y;

    Grid3 field(config.dims.x, config.dims.y, config.dims.z, config.exterior_hu);
    for (int z = 0; z < config.dims.z; ++z) {
        for (int y = 0; y < config.dims.y; ++y) {
            for (int x = 0; x < config.dims.x; ++x) {
                double v = config.exterior_hu;
                // Body: elliptic cylinder through every slice.
                {
                    const double nx = (x - body_cx) * sp.x / body_ax;
                    const double ny = (y - body_cy) * sp.y / body_ay;
                    const double n = std::sqrt(nx * nx + ny * ny);
                    const double d_mm = (n - 1.0) * std::min(body_ax, body_ay);
                    const double cov = coverage(d_mm);
                    v = v * (1.0 - cov) + config.body_hu * cov;
                }
                // Lungs carve noisy parenchyma out of the body.
                const Vec3d p{static_cast<double>(x), static_cast<double>(y),
                              static_cast<double>(z)};
                for (const auto& lung : lungs) {
                    const double n = ellipsoid_radius(p, lung);
                    const double d_mm = (n - 1.0) * min_semi_mm;
                    const double cov = coverage(d_mm);
                    if (cov > 0.0) {
                        v = v * (1.0 - cov) + config.lung_hu_mean * cov;
                    }
                }
                field.at(x, y, z) = v;
            }
        }
    }

    // Vessels, rasterized over their bounding boxes.
    for (const auto& c : vessels) {
        const double pad = (c.radius_mm + 2.0 * kEdgeMm);
        const int x0 = std::max(0, static_cast<int>(std::floor(
                                       std::min(c.a.x, c.b.x) - pad / sp.x)));
        const int x1 = std::min(config.dims.x - 1,
                                static_cast<int>(std::ceil(
                                    std::max(c.a.x, c.b.x) + pad / sp.x)));
        const int y0 = std::max(0, static_cast<int>(std::floor(
                                       std::min(c.a.y, c.b.y) - pad / sp.y)));
        const int y1 = std::min(config.dims.y - 1,
                                static_cast<int>(std::ceil(
                                    std::max(c.a.y, c.b.y) + pad / sp.y)));
        const int z0 = std::max(0, static_cast<int>(std::floor(
                                       std::min(c.a.z, c.b.z) - pad / sp.z)));
        const int z1 = std::min(config.dims.z - 1,
                                static_cast<int>(std::ceil(
                                    std::max(c.a.z, c.b.z) + pad / sp.z)));
        const Vec3d a_mm{c.a.x * sp.x, c.a.y * sp.y, c.a.z * sp.z};
        const Vec3d b_mm{c.b.x * sp.x, c.b.y * sp.y, c.b.z * sp.z};
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const Vec3d p_mm{x * sp.x, y * sp.y, z * sp.z};
                    const double d_mm =
                        segment_distance_mm(p_mm, a_mm, b_mm) - c.radius_mm;
                    const double cov = coverage(d_mm, 0.8);
                    if (cov > 0.0) {
                        double& v = field.at(x, y, z);
                        const double target = std::max(v, config.vessel_hu);
                        v = v * (1.0 - cov) + target * cov;
                    }
                }
            }
        }
    }

    // Nodules: soft-edged spheres.
    for (const auto& n : config.nodules) {
        const double r_vox_pad =
            (n.diameter_mm / 2.0 + 2.0 * kEdgeMm) / std::min({sp.x, sp.y, sp.z});
        const int x0 = std::max(0, n.center.x - static_cast<int>(r_vox_pad) - 1);
        const int x1 = std::min(config.dims.x - 1,
                                n.center.x + static_cast<int>(r_vox_pad) + 1);
        const int y0 = std::max(0, n.center.y - static_cast<int>(r_vox_pad) - 1);
        const int y1 = std::min(config.dims.y - 1,
                                n.center.y + static_cast<int>(r_vox_pad) + 1);
        const int z0 = std::max(0, n.center.z - static_cast<int>(r_vox_pad) - 1);
        const int z1 = std::min(config.dims.z - 1,
                                n.center.z + static_cast<int>(r_vox_pad) + 1);
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double dx = (x - n.center.x) * sp.x;
                    const double dy = (y - n.center.y) * sp.y;
                    const double dz = (z - n.center.z) * sp.z;
                    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
                    const double cov = coverage(r - n.diameter_mm / 2.0);
                    if (cov > 0.0) {
                        double& v = field.at(x, y, z);
                        const double target = std::max(v, n.hu_mean);
                        v = v * (1.0 - cov) + target * cov;
                    }
                }
            }
        }
    }

    // Quantum noise over the whole volume.
    std::vector<std::int16_t> voxels(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        voxels[i] = clamp_hu(field.data()[i] +
                             rng.normal(0.0, config.lung_hu_sigma));
    }

    Phantom out;
    out.volume =
        Volume(config.dims, config.spacing, std::move(voxels), config.series_id);
    for (const auto& n : config.nodules) {
        out.truth.push_back({n.center, n.diameter_mm, n.hu_mean});
    }
    return out;
}

std::vector<DatasetSample> generate_dataset(int n, double dia_lo, double dia_hi,
                                            DatasetMode mode, std::uint64_t seed) {
    if (n <= 0) throw Error("generate_dataset: n must be positive");
    if (dia_lo <= 0 || dia_hi < dia_lo) {
        throw Error("generate_dataset: bad diameter range");
    }
    std::vector<DatasetSample> out;
    out.reserve(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        PhantomConfig config;
        config.seed = rng.next_u64();
        config.series_id = "dataset-" + std::to_string(i);
        Rng site_rng(rng.next_u64());

        const auto lungs = lung_geometry(config);
        const double min_semi_mm = std::min(
            {lungs[0].semi_axes.x * config.spacing.x,
             lungs[0].semi_axes.y * config.spacing.y,
             lungs[0].semi_axes.z * config.spacing.z});

        const auto cut_fits = [&](Vec3i site) {
            const Vec3i ext = cuboid_extent_for(config.spacing, 32.0);
            const Vec3i origin{site.x - ext.x / 2, site.y - ext.y / 2,
                               site.z - ext.z / 2};
            return origin.x >= 0 && origin.y >= 0 && origin.z >= 0 &&
                   origin.x + ext.x <= config.dims.x &&
                   origin.y + ext.y <= config.dims.y &&
                   origin.z + ext.z <= config.dims.z;
        };

        DatasetSample sample;
        if (mode == DatasetMode::nodules) {
            const double dia = site_rng.uniform(dia_lo, dia_hi);
            const double hu = site_rng.uniform(-80.0, 0.0);
            const double margin = (dia / 2.0 + 4.0) / min_semi_mm;
            Vec3i site = random_lung_site(config, site_rng, margin);
            while (!cut_fits(site)) {
                site = random_lung_site(config, site_rng, margin);
            }
            config.nodules.push_back({site, dia, hu});
            Phantom ph = generate_phantom(config);
            sample.cuboid = cut_cuboid(ph.volume, site, 32.0);
            sample.site = site;
            sample.diameter_mm = dia;
        } else {
            Phantom ph = generate_phantom(config);
            // Clean air site: central mask region must average below -700 HU.
            Vec3i site{};
            bool found = false;
            for (int attempt = 0; attempt < 200 && !found; ++attempt) {
                site = random_lung_site(config, site_rng, 0.3);
                if (!cut_fits(site)) continue;
                double mean = 0.0;
                int count = 0;
                for (int dz = -8; dz < 8; ++dz) {
                    for (int dy = -8; dy < 8; ++dy) {
                        for (int dx = -8; dx < 8; ++dx) {
                            mean += ph.volume.at(site.x + dx, site.y + dy,
                                                 site.z + dz);
                            ++count;
                        }
                    }
                }
                mean /= count;
                if (mean < -700.0) found = true;
            }
            if (!found) {
                throw NoCandidates("generate_dataset: no clean air site found");
            }
            sample.cuboid = cut_cuboid(ph.volume, site, 32.0);
            sample.site = site;
            sample.diameter_mm = 0.0;
        }
        out.push_back(std::move(sample));
    }
    return out;
}

std::string truth_to_text(const std::vector<GroundTruthNodule>& truth) {
    std::ostringstream os;
    for (const auto& n : truth) {
        os << n.center.x << "," << n.center.y << "," << n.center.z << ","
           << n.diameter_mm << "\n";
    }
    return os.str();
}

std::vector<GroundTruthNodule> truth_from_text(const std::string& text) {
    std::vector<GroundTruthNodule> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        GroundTruthNodule n;
        char c1 = 0;
        char c2 = 0;
        char c3 = 0;
        std::istringstream ls(line);
        if (!(ls >> n.center.x >> c1 >> n.center.y >> c2 >> n.center.z >> c3 >>
              n.diameter_mm) ||
            c1 != ',' || c2 != ',' || c3 != ',') {
            throw Error("truth_from_text: bad line: " + line);
        }
        out.push_back(n);
    }
    return out;
}

}  // namespace ctforge
