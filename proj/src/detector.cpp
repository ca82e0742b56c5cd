#include "ctforge/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ctforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::max() / 4;

// Felzenszwalb-Huttenlocher 1D squared distance transform with sample
// pitch h: d(x) = min_i ((x - i)^2 h^2 + f(i)).
void dt_1d(const double* f, double* d, int n, double h) {
    static thread_local std::vector<int> v;
    static thread_local std::vector<double> z;
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    const double h2 = h * h;
    // kInf is finite, so "unreached" parabolas participate in ordinary
    // arithmetic (their mutual intersections reduce to midpoints) and the
    // classic envelope construction needs no special cases.
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[static_cast<std::size_t>(k)];
            s = ((f[q] + q * static_cast<double>(q) * h2) -
                 (f[p] + p * static_cast<double>(p) * h2)) /
                (2.0 * h2 * (q - p));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
        const int p = v[static_cast<std::size_t>(k)];
        const double dx = (q - p) * h;
        d[q] = dx * dx + f[p];
    }
}

}  // namespace

std::vector<double> squared_distance_to_false(const std::vector<std::uint8_t>& mask,
                                              Vec3i dims, Vec3d spacing) {
    const std::size_t n = static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    std::vector<double> dsq(n);
    for (std::size_t i = 0; i < n; ++i) dsq[i] = mask[i] != 0 ? kInf : 0.0;

    std::vector<double> line(static_cast<std::size_t>(
        std::max({dims.x, dims.y, dims.z})));
    std::vector<double> out(line.size());

    const auto index = [&](int x, int y, int z) {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims.x) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(dims.y) * static_cast<std::size_t>(z));
    };

    // x pass
    for (int z = 0; z < dims.z; ++z) {
        for (int y = 0; y < dims.y; ++y) {
            for (int x = 0; x < dims.x; ++x) line[static_cast<std::size_t>(x)] = dsq[index(x, y, z)];
            dt_1d(line.data(), out.data(), dims.x, spacing.x);
            for (int x = 0; x < dims.x; ++x) dsq[index(x, y, z)] = out[static_cast<std::size_t>(x)];
        }
    }
    // y pass
    for (int z = 0; z < dims.z; ++z) {
        for (int x = 0; x < dims.x; ++x) {
            for (int y = 0; y < dims.y; ++y) line[static_cast<std::size_t>(y)] = dsq[index(x, y, z)];
            dt_1d(line.data(), out.data(), dims.y, spacing.y);
            for (int y = 0; y < dims.y; ++y) dsq[index(x, y, z)] = out[static_cast<std::size_t>(y)];
        }
    }
    // z pass
    for (int y = 0; y < dims.y; ++y) {
        for (int x = 0; x < dims.x; ++x) {
            for (int z = 0; z < dims.z; ++z) line[static_cast<std::size_t>(z)] = dsq[index(x, y, z)];
            dt_1d(line.data(), out.data(), dims.z, spacing.z);
            for (int z = 0; z < dims.z; ++z) dsq[index(x, y, z)] = out[static_cast<std::size_t>(z)];
        }
    }
    return dsq;
}

std::vector<DetectedNodule> detect_nodules(const Volume& volume,
                                           const ThresholdDetectorConfig& config) {
    const Vec3i d = volume.dims();
    const std::size_t n = volume.voxel_count();
    std::vector<std::uint8_t> tissue(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        tissue[i] = volume.voxels()[i] > config.hu_threshold ? 1 : 0;
    }
    const std::vector<double> dsq =
        squared_distance_to_false(tissue, d, volume.spacing());

    const double margin2 = config.core_margin_mm * config.core_margin_mm;
    std::vector<std::uint8_t> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        core[i] = (tissue[i] != 0 && dsq[i] >= margin2) ? 1 : 0;
    }

    const double voxel_mm3 =
        volume.spacing().x * volume.spacing().y * volume.spacing().z;
    std::vector<DetectedNodule> out;
    std::vector<std::size_t> stack;
    std::vector<std::uint8_t> seen(n, 0);

    for (std::size_t start = 0; start < n; ++start) {
        if (core[start] == 0 || seen[start] != 0) continue;
        stack.clear();
        stack.push_back(start);
        seen[start] = 1;
        double cx = 0.0;
        double cy = 0.0;
        double cz = 0.0;
        std::size_t count = 0;
        bool touches_border = false;

        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(at % static_cast<std::size_t>(d.x));
            const int y = static_cast<int>((at / static_cast<std::size_t>(d.x)) %
                                           static_cast<std::size_t>(d.y));
            const int z = static_cast<int>(at / (static_cast<std::size_t>(d.x) *
                                                 static_cast<std::size_t>(d.y)));
            ++count;
            cx += x;
            cy += y;
            cz += z;
            if (x == 0 || y == 0 || z == 0 || x == d.x - 1 || y == d.y - 1 ||
                z == d.z - 1) {
                touches_border = true;
            }
            const int neighbors[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
            for (const auto& nb : neighbors) {
                const int nx = x + nb[0];
                const int ny = y + nb[1];
                const int nz = z + nb[2];
                if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y ||
                    nz >= d.z) {
                    continue;
                }
                const std::size_t ni = volume.index(nx, ny, nz);
                if (core[ni] != 0 && seen[ni] == 0) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
        }

        const double core_mm3 = static_cast<double>(count) * voxel_mm3;
        const double core_diameter =
            2.0 * std::cbrt(3.0 * core_mm3 / (4.0 * 3.14159265358979323846));
        // The transform measures to false voxel centers, half a voxel beyond
        // the continuum boundary on each side.
        const double boundary_bias = std::min(
            {volume.spacing().x, volume.spacing().y, volume.spacing().z});
        const double diameter =
            core_diameter + 2.0 * config.core_margin_mm - boundary_bias;
        if (touches_border || diameter > config.max_diameter_mm ||
            count < config.min_core_voxels) {
            continue;
        }
        DetectedNodule nod;
        nod.center = {static_cast<int>(std::llround(cx / count)),
                      static_cast<int>(std::llround(cy / count)),
                      static_cast<int>(std::llround(cz / count))};
        nod.diameter_mm = diameter;
        nod.voxel_count = count;
        out.push_back(nod);
    }

    std::sort(out.begin(), out.end(),
              [](const DetectedNodule& a, const DetectedNodule& b) {
                  return a.diameter_mm > b.diameter_mm;
              });
    return out;
}

}  // namespace ctforge
