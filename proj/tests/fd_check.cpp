#include "fd_check.hpp"

#include <algorithm>

namespace fd {

using namespace ctforge::nn;

namespace {

struct ConvCase {
    int ci, co, k, stride, pad, d, h, w;
};

ConvCase random_conv_case(Rng& rng, bool transposed) {
    ConvCase c;
    c.ci = static_cast<int>(rng.uniform_int(1, 3));
    c.co = static_cast<int>(rng.uniform_int(1, 3));
    c.k = static_cast<int>(rng.uniform_int(1, 4));
    c.stride = static_cast<int>(rng.uniform_int(1, 2));
    c.pad = static_cast<int>(rng.uniform_int(0, 1));
    for (;;) {
        c.d = static_cast<int>(rng.uniform_int(c.k, c.k + 3));
        c.h = static_cast<int>(rng.uniform_int(c.k, c.k + 3));
        c.w = static_cast<int>(rng.uniform_int(c.k, c.k + 3));
        if (transposed) {
            if (deconv_out_dim(c.d, c.k, c.stride, c.pad) >= 1 &&
                deconv_out_dim(c.h, c.k, c.stride, c.pad) >= 1 &&
                deconv_out_dim(c.w, c.k, c.stride, c.pad) >= 1) {
                break;
            }
        } else {
            if (conv_out_dim(c.d, c.k, c.stride, c.pad) >= 1 &&
                conv_out_dim(c.h, c.k, c.stride, c.pad) >= 1 &&
                conv_out_dim(c.w, c.k, c.stride, c.pad) >= 1) {
                break;
            }
        }
    }
    return c;
}

double check_conv(Rng& rng) {
    const ConvCase c = random_conv_case(rng, false);
    DTensor input = random_tensor({c.ci, c.d, c.h, c.w}, rng);
    DTensor weight = random_tensor({c.co, c.ci, c.k, c.k, c.k}, rng);
    DTensor bias = random_tensor({c.co}, rng);
    DTensor out = conv3d_forward(input, weight, bias, c.stride, c.pad);
    DTensor readout = random_tensor(out.shape, rng, 1.0);

    const auto loss = [&]() {
        return weighted_sum(conv3d_forward(input, weight, bias, c.stride, c.pad),
                            readout);
    };
    const ConvGrads<double> grads =
        conv3d_backward(input, weight, readout, c.stride, c.pad);
    double worst = check_tensor(input, loss, grads.input);
    worst = std::max(worst, check_tensor(weight, loss, grads.weight));
    worst = std::max(worst, check_tensor(bias, loss, grads.bias));
    return worst;
}

double check_deconv(Rng& rng) {
    const ConvCase c = random_conv_case(rng, true);
    DTensor input = random_tensor({c.ci, c.d, c.h, c.w}, rng);
    DTensor weight = random_tensor({c.ci, c.co, c.k, c.k, c.k}, rng);
    DTensor bias = random_tensor({c.co}, rng);
    DTensor out = deconv3d_forward(input, weight, bias, c.stride, c.pad);
    DTensor readout = random_tensor(out.shape, rng, 1.0);

    const auto loss = [&]() {
        return weighted_sum(
            deconv3d_forward(input, weight, bias, c.stride, c.pad), readout);
    };
    const ConvGrads<double> grads =
        deconv3d_backward(input, weight, readout, c.stride, c.pad);
    double worst = check_tensor(input, loss, grads.input);
    worst = std::max(worst, check_tensor(weight, loss, grads.weight));
    worst = std::max(worst, check_tensor(bias, loss, grads.bias));
    return worst;
}

double check_norm(Rng& rng) {
    const int c = static_cast<int>(rng.uniform_int(1, 3));
    const int d = static_cast<int>(rng.uniform_int(2, 4));
    const int h = static_cast<int>(rng.uniform_int(2, 4));
    const int w = static_cast<int>(rng.uniform_int(2, 4));
    DTensor input = random_tensor({c, d, h, w}, rng);
    DTensor gamma = random_tensor({c}, rng, 0.3);
    DTensor beta = random_tensor({c}, rng, 0.3);
    for (auto& v : gamma.data) v += 1.0;

    DTensor probe = input;
    NormCache<double> cache;
    DTensor out = norm_forward(probe, gamma, beta, &cache);
    DTensor readout = random_tensor(out.shape, rng, 1.0);

    const auto loss = [&]() {
        return weighted_sum(norm_forward(input, gamma, beta,
                                         static_cast<NormCache<double>*>(nullptr)),
                            readout);
    };
    const NormGrads<double> grads =
        norm_backward(input, gamma, readout, cache);
    double worst = check_tensor(input, loss, grads.input);
    worst = std::max(worst, check_tensor(gamma, loss, grads.gamma));
    worst = std::max(worst, check_tensor(beta, loss, grads.beta));
    return worst;
}

double check_activation(Rng& rng, Act act) {
    const int c = static_cast<int>(rng.uniform_int(1, 3));
    const int d = static_cast<int>(rng.uniform_int(2, 5));
    DTensor input = random_tensor({c, d, d, d}, rng, 0.8);
    DTensor out = activation_forward(input, act);
    DTensor readout = random_tensor(out.shape, rng, 1.0);

    const auto loss = [&]() {
        return weighted_sum(activation_forward(input, act), readout);
    };
    const DTensor grad = activation_backward(input, readout, act);
    return check_tensor(input, loss, grad);
}

double check_dropout(Rng& rng) {
    const int c = static_cast<int>(rng.uniform_int(1, 3));
    const int d = static_cast<int>(rng.uniform_int(2, 5));
    DTensor input = random_tensor({c, d, d, d}, rng);
    const double rate = 0.5;
    // Draw the mask once; the checked function applies it deterministically.
    std::vector<std::uint8_t> mask;
    Rng mask_rng(rng.next_u64());
    (void)dropout_forward(input, rate, mask_rng, mask);

    DTensor readout = random_tensor({c, d, d, d}, rng, 1.0);
    const auto apply = [&](const DTensor& x) {
        DTensor out = x;
        const double scale = 1.0 / (1.0 - rate);
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            out.data[i] = mask[i] != 0 ? out.data[i] * scale : 0.0;
        }
        return out;
    };
    const auto loss = [&]() { return weighted_sum(apply(input), readout); };
    const DTensor grad = dropout_backward(readout, mask, rate);
    return check_tensor(input, loss, grad);
}

double check_bce(Rng& rng) {
    double worst = 0.0;
    for (int i = 0; i < 8; ++i) {
        double logit = rng.normal(0.0, 2.0);
        const double label = rng.uniform() < 0.5 ? 0.0 : 1.0;
        const auto loss = [&]() { return bce_loss_from_logit(logit, label); };
        const double analytic = bce_grad_from_logit(logit, label);
        const double saved = logit;
        logit = saved + kEps;
        const double up = loss();
        logit = saved - kEps;
        const double down = loss();
        logit = saved;
        worst = std::max(worst, rel_err(analytic, (up - down) / (2.0 * kEps)));
    }
    return worst;
}

}  // namespace

PrimitiveReport run_primitive_checks(int shapes, std::uint64_t seed) {
    Rng rng(seed);
    PrimitiveReport rep;
    rep.shapes = shapes;
    for (int s = 0; s < shapes; ++s) {
        rep.conv = std::max(rep.conv, check_conv(rng));
        rep.deconv = std::max(rep.deconv, check_deconv(rng));
        rep.norm = std::max(rep.norm, check_norm(rng));
        rep.act_leaky = std::max(rep.act_leaky, check_activation(rng, Act::LeakyRelu));
        rep.act_relu = std::max(rep.act_relu, check_activation(rng, Act::Relu));
        rep.act_tanh = std::max(rep.act_tanh, check_activation(rng, Act::Tanh));
        rep.act_sigmoid =
            std::max(rep.act_sigmoid, check_activation(rng, Act::Sigmoid));
        rep.dropout = std::max(rep.dropout, check_dropout(rng));
        rep.bce = std::max(rep.bce, check_bce(rng));
    }
    return rep;
}

namespace {

// Directional derivative check: perturb every parameter (and the input)
// along a random direction. Aggregating over the whole graph keeps the
// isolated activation-kink crossings of a deep composite from polluting the
// comparison while still exposing any wiring error.
struct Direction {
    NetParamsT<double> params;
    DTensor input;
};

Direction random_direction(const std::vector<LayerSpec>& specs,
                           const std::vector<int>& input_shape, Rng& rng) {
    Direction dir;
    dir.params = zero_params<double>(specs);
    for (auto& blk : dir.params.blocks) {
        for (auto& v : blk.w.data) v = rng.normal(0.0, 1.0);
        for (auto& v : blk.b.data) v = rng.normal(0.0, 1.0);
        for (auto& v : blk.gamma.data) v = rng.normal(0.0, 1.0);
        for (auto& v : blk.beta.data) v = rng.normal(0.0, 1.0);
    }
    dir.input = DTensor(input_shape);
    for (auto& v : dir.input.data) v = rng.normal(0.0, 1.0);
    return dir;
}

void apply_direction(NetParamsT<double>& net, DTensor& input,
                     const Direction& dir, double scale) {
    for (std::size_t b = 0; b < net.blocks.size(); ++b) {
        net.blocks[b].w.axpy(scale, dir.params.blocks[b].w);
        net.blocks[b].b.axpy(scale, dir.params.blocks[b].b);
        if (!net.blocks[b].gamma.empty()) {
            net.blocks[b].gamma.axpy(scale, dir.params.blocks[b].gamma);
            net.blocks[b].beta.axpy(scale, dir.params.blocks[b].beta);
        }
    }
    input.axpy(scale, dir.input);
}

double dot_grads(const NetParamsT<double>& grads, const DTensor& input_grad,
                 const Direction& dir) {
    double acc = 0.0;
    const auto dot = [](const DTensor& a, const DTensor& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
        return s;
    };
    for (std::size_t b = 0; b < grads.blocks.size(); ++b) {
        acc += dot(grads.blocks[b].w, dir.params.blocks[b].w);
        acc += dot(grads.blocks[b].b, dir.params.blocks[b].b);
        if (!grads.blocks[b].gamma.empty()) {
            acc += dot(grads.blocks[b].gamma, dir.params.blocks[b].gamma);
            acc += dot(grads.blocks[b].beta, dir.params.blocks[b].beta);
        }
    }
    acc += dot(input_grad, dir.input);
    return acc;
}

// Piecewise-linear activations make central differences diverge at kink
// crossings (an O(1) error per crossing, independent of eps), so the
// composite wiring checks run the same graph with smooth activations; the
// kinked activations are verified in isolation by the primitive checks.
std::vector<LayerSpec> smoothed(std::vector<LayerSpec> specs) {
    for (auto& s : specs) {
        if (s.act == Act::LeakyRelu || s.act == Act::Relu) s.act = Act::Tanh;
    }
    return specs;
}

}  // namespace

double run_generator_composite_check(int directions, std::uint64_t seed) {
    Rng rng(seed);
    GanArchConfig arch;
    arch.gen_base = 1;
    arch.dropout_rate = 0.0;
    const auto specs = smoothed(generator_layout(arch));
    NetParamsT<double> net = init_params<double>(specs, rng);
    DTensor input = random_tensor({1, 32, 32, 32}, rng);
    GenTrace<double> trace;
    DTensor out = generator_net_forward(input, specs, net, false, 0.0,
                                        static_cast<Rng*>(nullptr), &trace);
    DTensor readout = random_tensor(out.shape, rng, 1.0);

    NetParamsT<double> grads = zero_params<double>(specs);
    generator_net_backward(readout, specs, net, trace, 0.0, &grads);
    // The gradient w.r.t. the input needs a separate traced pass through the
    // first encoder block; reuse the full backward by re-running forward with
    // an input that participates in the direction instead.
    const auto loss = [&]() {
        return weighted_sum(
            generator_net_forward(input, specs, net, false, 0.0,
                                  static_cast<Rng*>(nullptr),
                                  static_cast<GenTrace<double>*>(nullptr)),
            readout);
    };

    double worst = 0.0;
    for (int k = 0; k < directions; ++k) {
        Direction dir = random_direction(specs, input.shape, rng);
        // Input gradient is not exposed by generator_net_backward; zero the
        // input component so the directional comparison covers parameters.
        dir.input.fill(0.0);
        apply_direction(net, input, dir, kEps);
        const double up = loss();
        apply_direction(net, input, dir, -2.0 * kEps);
        const double down = loss();
        apply_direction(net, input, dir, kEps);
        const double numeric = (up - down) / (2.0 * kEps);
        const double analytic = dot_grads(grads, DTensor(input.shape), dir);
        worst = std::max(worst, rel_err(analytic, numeric));
    }
    return worst;
}

double run_discriminator_composite_check(int directions, std::uint64_t seed) {
    Rng rng(seed);
    GanArchConfig arch;
    arch.disc_base = 1;
    const auto specs = smoothed(discriminator_layout(arch));
    NetParamsT<double> net = init_params<double>(specs, rng);
    DTensor input = random_tensor({2, 32, 32, 32}, rng);
    DiscTrace<double> trace;
    (void)discriminator_net_forward(input, specs, net, &trace);

    NetParamsT<double> grads = zero_params<double>(specs);
    const DTensor input_grad =
        discriminator_net_backward(1.0, specs, net, trace, &grads);

    const auto loss = [&]() {
        return discriminator_net_forward(input, specs, net,
                                         static_cast<DiscTrace<double>*>(nullptr));
    };
    double worst = 0.0;
    for (int k = 0; k < directions; ++k) {
        Direction dir = random_direction(specs, input.shape, rng);
        apply_direction(net, input, dir, kEps);
        const double up = loss();
        apply_direction(net, input, dir, -2.0 * kEps);
        const double down = loss();
        apply_direction(net, input, dir, kEps);
        const double numeric = (up - down) / (2.0 * kEps);
        const double analytic = dot_grads(grads, input_grad, dir);
        worst = std::max(worst, rel_err(analytic, numeric));
    }
    return worst;
}

}  // namespace fd
