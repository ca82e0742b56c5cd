#pragma once

// Central finite-difference gradient checking harness. The numeric
// derivative is the oracle; analytic gradients from the backward passes are
// checked against it in double precision.

#include <cmath>
#include <functional>
#include <vector>

#include "ctforge/nn/net.hpp"
#include "ctforge/nn/ops.hpp"
#include "ctforge/rng.hpp"

namespace fd {

using ctforge::Rng;
using DTensor = ctforge::nn::TensorT<double>;

constexpr double kEps = 1e-4;

inline double rel_err(double analytic, double numeric) {
    const double denom =
        std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
    return std::fabs(analytic - numeric) / denom;
}

// Perturbs every element of `param` and compares the central difference of
// `loss` against `analytic`. Returns the maximum relative error seen.
inline double check_tensor(DTensor& param, const std::function<double()>& loss,
                           const DTensor& analytic) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double saved = param.data[i];
        param.data[i] = saved + kEps;
        const double up = loss();
        param.data[i] = saved - kEps;
        const double down = loss();
        param.data[i] = saved;
        const double numeric = (up - down) / (2.0 * kEps);
        worst = std::max(worst, rel_err(analytic.data[i], numeric));
    }
    return worst;
}

// As above but only for a deterministic sample of elements (for large
// composites).
inline double check_tensor_sampled(DTensor& param,
                                   const std::function<double()>& loss,
                                   const DTensor& analytic, int samples,
                                   Rng& rng) {
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const auto i = static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(param.data.size()) - 1));
        const double saved = param.data[i];
        param.data[i] = saved + kEps;
        const double up = loss();
        param.data[i] = saved - kEps;
        const double down = loss();
        param.data[i] = saved;
        const double numeric = (up - down) / (2.0 * kEps);
        worst = std::max(worst, rel_err(analytic.data[i], numeric));
    }
    return worst;
}

inline DTensor random_tensor(const std::vector<int>& shape, Rng& rng,
                             double scale = 0.5) {
    DTensor t(shape);
    for (auto& v : t.data) {
        v = rng.normal(0.0, scale);
        // Keep values away from activation kinks so the numeric derivative
        // is well defined.
        if (std::fabs(v) < 4.0 * kEps) v += v >= 0.0 ? 0.01 : -0.01;
    }
    return t;
}

// Weighted-sum readout makes the loss sensitive to every output element.
inline double weighted_sum(const DTensor& out, const DTensor& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        s += out.data[i] * weights.data[i];
    }
    return s;
}

struct PrimitiveReport {
    double conv = 0.0;
    double deconv = 0.0;
    double norm = 0.0;
    double act_leaky = 0.0;
    double act_relu = 0.0;
    double act_tanh = 0.0;
    double act_sigmoid = 0.0;
    double dropout = 0.0;
    double bce = 0.0;
    int shapes = 0;
};

// Runs `shapes` randomized small configurations through every primitive.
PrimitiveReport run_primitive_checks(int shapes, std::uint64_t seed);

// Composite checks through the full generator and discriminator graphs.
double run_generator_composite_check(int param_samples, std::uint64_t seed);
double run_discriminator_composite_check(int param_samples, std::uint64_t seed);

}  // namespace fd
