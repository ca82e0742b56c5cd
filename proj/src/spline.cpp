#include "ctforge/spline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctforge/error.hpp"

namespace ctforge {

void cubic_spline_coefficients(const double* f, int n, double* c) {
    // Interpolation conditions (c[i-1] + 4 c[i] + c[i+1]) / 6 = f[i] with
    // natural ghosts c[-1] = 2c[0] - c[1], c[n] = 2c[n-1] - c[n-2] reduce to
    // c[0] = f[0], c[n-1] = f[n-1] and a tridiagonal system in between.
    c[0] = f[0];
    c[n - 1] = f[n - 1];
    const int m = n - 2;
    if (m <= 0) return;

    // Thomas algorithm for the interior unknowns c[1..n-2]:
    //   c[i-1] + 4 c[i] + c[i+1] = 6 f[i]
    std::vector<double> diag(m, 4.0);
    std::vector<double> rhs(m);
    for (int i = 0; i < m; ++i) rhs[i] = 6.0 * f[i + 1];
    rhs[0] -= c[0];
    rhs[m - 1] -= c[n - 1];
    for (int i = 1; i < m; ++i) {
        const double w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    c[m] = rhs[m - 1] / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) {
        c[i + 1] = (rhs[i] - c[i + 2]) / diag[i];
    }
}

double cubic_spline_eval(const double* c, int n, double t) {
    t = std::clamp(t, 0.0, static_cast<double>(n - 1));
    int i = static_cast<int>(std::floor(t));
    if (i > n - 2) i = n - 2;
    const double u = t - i;

    const auto coeff = [&](int k) -> double {
        if (k < 0) return 2.0 * c[0] - c[1];
        if (k > n - 1) return 2.0 * c[n - 1] - c[n - 2];
        return c[k];
    };
    const double w0 = (1.0 - u) * (1.0 - u) * (1.0 - u) / 6.0;
    const double w1 = (4.0 - 6.0 * u * u + 3.0 * u * u * u) / 6.0;
    const double v = 1.0 - u;
    const double w2 = (4.0 - 6.0 * v * v + 3.0 * v * v * v) / 6.0;
    const double w3 = u * u * u / 6.0;
    return w0 * coeff(i - 1) + w1 * coeff(i) + w2 * coeff(i + 1) +
           w3 * coeff(i + 2);
}

Spline2d::Spline2d(const double* data, int nx, int ny) : nx_(nx), ny_(ny) {
    if (nx < 2 || ny < 2) {
        throw DegenerateExtent("Spline2d: grid extents must be >= 2");
    }
    c_.resize(static_cast<std::size_t>(nx) * ny);
    std::vector<double> line(static_cast<std::size_t>(std::max(nx, ny)));
    std::vector<double> coef(line.size());
    // Coefficients along x for each row, then along y for each column.
    for (int j = 0; j < ny; ++j) {
        cubic_spline_coefficients(data + static_cast<std::size_t>(j) * nx, nx,
                                  c_.data() + static_cast<std::size_t>(j) * nx);
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            line[static_cast<std::size_t>(j)] =
                c_[static_cast<std::size_t>(j) * nx + i];
        }
        cubic_spline_coefficients(line.data(), ny, coef.data());
        for (int j = 0; j < ny; ++j) {
            c_[static_cast<std::size_t>(j) * nx + i] =
                coef[static_cast<std::size_t>(j)];
        }
    }
}

double Spline2d::coeff(int i, int j) const {
    // Natural extension, x first then y.
    if (i < 0) return 2.0 * coeff(0, j) - coeff(1, j);
    if (i > nx_ - 1) return 2.0 * coeff(nx_ - 1, j) - coeff(nx_ - 2, j);
    if (j < 0) return 2.0 * coeff(i, 0) - coeff(i, 1);
    if (j > ny_ - 1) return 2.0 * coeff(i, ny_ - 1) - coeff(i, ny_ - 2);
    return c_[static_cast<std::size_t>(j) * nx_ + i];
}

double Spline2d::eval(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(nx_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(ny_ - 1));
    int ix = static_cast<int>(std::floor(x));
    int iy = static_cast<int>(std::floor(y));
    if (ix > nx_ - 2) ix = nx_ - 2;
    if (iy > ny_ - 2) iy = ny_ - 2;
    const double u = x - ix;
    const double v = y - iy;

    const auto weights = [](double t, double w[4]) {
        const double s = 1.0 - t;
        w[0] = s * s * s / 6.0;
        w[1] = (4.0 - 6.0 * t * t + 3.0 * t * t * t) / 6.0;
        w[2] = (4.0 - 6.0 * s * s + 3.0 * s * s * s) / 6.0;
        w[3] = t * t * t / 6.0;
    };
    double wx[4];
    double wy[4];
    weights(u, wx);
    weights(v, wy);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
            row += wx[i] * coeff(ix - 1 + i, iy - 1 + j);
        }
        acc += wy[j] * row;
    }
    return acc;
}

namespace {

// Resamples along one axis (0=x, 1=y, 2=z) to `target_n` samples.
Grid3 resample_axis(const Grid3& src, int axis, int target_n, int order) {
    const int nx = src.nx();
    const int ny = src.ny();
    const int nz = src.nz();
    const int n = axis == 0 ? nx : (axis == 1 ? ny : nz);

    Vec3i od = src.dims();
    (axis == 0 ? od.x : axis == 1 ? od.y : od.z) = target_n;
    Grid3 out(od.x, od.y, od.z);

    const double scale = static_cast<double>(n - 1) / (target_n - 1);
    std::vector<double> line(static_cast<std::size_t>(n));
    std::vector<double> coef(static_cast<std::size_t>(n));

    const int on1 = axis == 0 ? od.y : od.x;
    const int on2 = axis == 0 ? od.z : (axis == 1 ? od.z : od.y);
    for (int b = 0; b < on2; ++b) {
        for (int a = 0; a < on1; ++a) {
            for (int i = 0; i < n; ++i) {
                const int x = axis == 0 ? i : a;
                const int y = axis == 0 ? a : (axis == 1 ? i : b);
                const int z = axis == 2 ? i : b;
                line[static_cast<std::size_t>(i)] = src.at(x, y, z);
            }
            if (order == 3) {
                cubic_spline_coefficients(line.data(), n, coef.data());
            }
            for (int j = 0; j < target_n; ++j) {
                const double t = j * scale;
                double value;
                if (order == 3) {
                    value = cubic_spline_eval(coef.data(), n, t);
                } else {
                    const double tc = std::clamp(t, 0.0, static_cast<double>(n - 1));
                    int i0 = static_cast<int>(std::floor(tc));
                    if (i0 > n - 2) i0 = n - 2;
                    const double u = tc - i0;
                    value = (1.0 - u) * line[static_cast<std::size_t>(i0)] +
                            u * line[static_cast<std::size_t>(i0 + 1)];
                }
                const int x = axis == 0 ? j : a;
                const int y = axis == 0 ? a : (axis == 1 ? j : b);
                const int z = axis == 2 ? j : b;
                out.at(x, y, z) = value;
            }
        }
    }
    return out;
}

}  // namespace

Grid3 resample_spline(const Grid3& src, Vec3i target, int order) {
    if (order != 1 && order != 3) {
        throw Error("resample_spline: order must be 1 or 3");
    }
    if (src.nx() < 2 || src.ny() < 2 || src.nz() < 2) {
        throw DegenerateExtent("resample_spline: source extents must all be >= 2");
    }
    if (target.x < 2 || target.y < 2 || target.z < 2) {
        throw DegenerateExtent("resample_spline: target extents must all be >= 2");
    }
    Grid3 g = src;
    if (target.x != g.nx()) g = resample_axis(g, 0, target.x, order);
    if (target.y != g.ny()) g = resample_axis(g, 1, target.y, order);
    if (target.z != g.nz()) g = resample_axis(g, 2, target.z, order);
    return g;
}

}  // namespace ctforge
