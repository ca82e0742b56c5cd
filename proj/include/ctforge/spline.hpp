#pragma once

#include <vector>

#include "ctforge/geometry.hpp"

namespace ctforge {

// Resamples a 3D grid onto `target` dims spanning the same extent
// (output index j maps to source coordinate j * (n_in - 1) / (n_out - 1)).
// order 1 = trilinear, order 3 = interpolating cubic spline with natural end
// conditions. Sample coordinates are clamped to the source domain; there is
// no mirror padding. Every source axis and every target axis must be >= 2.
Grid3 resample_spline(const Grid3& src, Vec3i target, int order);

// 1D building blocks, exposed for tests.

// Interpolating cubic B-spline coefficients with natural (zero second
// derivative) end conditions; reproduces polynomials up to degree 1 exactly.
void cubic_spline_coefficients(const double* f, int n, double* c);

// Evaluates the spline at t in [0, n-1] (clamped).
double cubic_spline_eval(const double* c, int n, double t);

// Tensor-product interpolating cubic spline over a 2D grid, for sampling at
// arbitrary (clamped) in-plane positions such as rotations.
class Spline2d {
public:
    Spline2d(const double* data, int nx, int ny);
    double eval(double x, double y) const;

private:
    double coeff(int i, int j) const;
    int nx_;
    int ny_;
    std::vector<double> c_;
};

}  // namespace ctforge
