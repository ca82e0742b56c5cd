#pragma once

#include <string>
#include <vector>

#include "ctforge/nn/ops.hpp"
#include "ctforge/nn/tensor.hpp"
#include "ctforge/rng.hpp"

namespace ctforge::nn {

struct LayerSpec {
    std::string name;
    bool transposed = false;
    int in_c = 0;
    int out_c = 0;
    int k = 4;
    int stride = 2;
    int pad = 1;
    bool norm = false;
    Act act = Act::None;
    bool dropout = false;
};

// Widths of both networks scale with a base channel count; the paper-scale
// configuration uses base 100 for both.
struct GanArchConfig {
    int gen_base = 2;
    int disc_base = 2;
    double dropout_rate = 0.5;

    static GanArchConfig paper_scale() { return {100, 100, 0.5}; }
    static GanArchConfig toy_scale() { return {2, 2, 0.5}; }

    friend bool operator==(const GanArchConfig&, const GanArchConfig&) = default;
};

// Encoder-decoder generator over 32^3 single-channel cubes: five strided
// 4^3 convolutions down to 1^3, then five transposed convolutions back up
// with skip concatenations, tanh output. Decoder layer inputs include the
// concatenated skip channels.
inline std::vector<LayerSpec> generator_layout(const GanArchConfig& cfg) {
    const int g = cfg.gen_base;
    return {
        {"e1", false, 1, g, 4, 2, 1, false, Act::LeakyRelu, false},
        {"e2", false, g, 2 * g, 4, 2, 1, true, Act::LeakyRelu, false},
        {"e3", false, 2 * g, 4 * g, 4, 2, 1, true, Act::LeakyRelu, false},
        {"e4", false, 4 * g, 8 * g, 4, 2, 1, true, Act::LeakyRelu, false},
        // Innermost layer: spatial size 1^3, so per-sample normalization
        // would erase the activation.
        {"e5", false, 8 * g, 8 * g, 4, 2, 1, false, Act::LeakyRelu, false},
        {"d1", true, 8 * g, 8 * g, 4, 2, 1, true, Act::Relu, true},
        {"d2", true, 16 * g, 4 * g, 4, 2, 1, true, Act::Relu, true},
        {"d3", true, 8 * g, 2 * g, 4, 2, 1, true, Act::Relu, false},
        {"d4", true, 4 * g, g, 4, 2, 1, true, Act::Relu, false},
        {"out", true, 2 * g, 1, 4, 2, 1, false, Act::Tanh, false},
    };
}

// Strided-convolution discriminator over the 2-channel concatenated pair,
// ending in a 3^3 patch convolution whose logits are mean-pooled.
inline std::vector<LayerSpec> discriminator_layout(const GanArchConfig& cfg) {
    const int d = cfg.disc_base;
    return {
        {"c1", false, 2, d, 4, 2, 1, false, Act::LeakyRelu, false},
        {"c2", false, d, 2 * d, 4, 2, 1, true, Act::LeakyRelu, false},
        {"c3", false, 2 * d, 4 * d, 4, 2, 1, true, Act::LeakyRelu, false},
        {"c4", false, 4 * d, 8 * d, 4, 2, 1, true, Act::LeakyRelu, false},
        {"patch", false, 8 * d, 1, 3, 1, 1, false, Act::None, false},
    };
}

inline std::size_t layout_param_count(const std::vector<LayerSpec>& specs) {
    std::size_t n = 0;
    for (const auto& s : specs) {
        n += static_cast<std::size_t>(s.in_c) * s.out_c * s.k * s.k * s.k;
        n += static_cast<std::size_t>(s.out_c);  // bias
        if (s.norm) n += 2 * static_cast<std::size_t>(s.out_c);
    }
    return n;
}

template <typename T>
struct ParamBlockT {
    TensorT<T> w;
    TensorT<T> b;
    TensorT<T> gamma;  // empty when the layer has no norm
    TensorT<T> beta;
};

template <typename T>
struct NetParamsT {
    std::vector<ParamBlockT<T>> blocks;

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& blk : blocks) {
            n += blk.w.numel() + blk.b.numel() + blk.gamma.numel() +
                 blk.beta.numel();
        }
        return n;
    }

    bool all_finite() const {
        for (const auto& blk : blocks) {
            if (!blk.w.all_finite() || !blk.b.all_finite() ||
                !blk.gamma.all_finite() || !blk.beta.all_finite()) {
                return false;
            }
        }
        return true;
    }

    void zero() {
        for (auto& blk : blocks) {
            blk.w.fill(T(0));
            blk.b.fill(T(0));
            blk.gamma.fill(T(0));
            blk.beta.fill(T(0));
        }
    }

    std::vector<T> flatten() const {
        std::vector<T> out;
        for (const auto& blk : blocks) {
            out.insert(out.end(), blk.w.data.begin(), blk.w.data.end());
            out.insert(out.end(), blk.b.data.begin(), blk.b.data.end());
            out.insert(out.end(), blk.gamma.data.begin(), blk.gamma.data.end());
            out.insert(out.end(), blk.beta.data.begin(), blk.beta.data.end());
        }
        return out;
    }
};

template <typename T>
ParamBlockT<T> zero_block_like(const LayerSpec& s) {
    ParamBlockT<T> blk;
    if (s.transposed) {
        blk.w = TensorT<T>({s.in_c, s.out_c, s.k, s.k, s.k});
    } else {
        blk.w = TensorT<T>({s.out_c, s.in_c, s.k, s.k, s.k});
    }
    blk.b = TensorT<T>({s.out_c});
    if (s.norm) {
        blk.gamma = TensorT<T>({s.out_c});
        blk.beta = TensorT<T>({s.out_c});
    }
    return blk;
}

// Zero-mean Gaussian weights scaled by fan-in; unit norm scales.
template <typename T>
NetParamsT<T> init_params(const std::vector<LayerSpec>& specs, Rng& rng) {
    NetParamsT<T> net;
    for (const auto& s : specs) {
        ParamBlockT<T> blk = zero_block_like<T>(s);
        const double fan_in = static_cast<double>(s.in_c) * s.k * s.k * s.k;
        const double sigma = std::sqrt(2.0 / fan_in);
        for (T& v : blk.w.data) v = static_cast<T>(rng.normal(0.0, sigma));
        if (s.norm) blk.gamma.fill(T(1));
        net.blocks.push_back(std::move(blk));
    }
    return net;
}

template <typename T>
NetParamsT<T> zero_params(const std::vector<LayerSpec>& specs) {
    NetParamsT<T> net;
    for (const auto& s : specs) net.blocks.push_back(zero_block_like<T>(s));
    return net;
}

// ---------------------------------------------------------------------------
// One layer: conv/deconv -> norm -> dropout -> activation.
// ---------------------------------------------------------------------------

template <typename T>
struct BlockCache {
    TensorT<T> input;
    TensorT<T> conv_out;
    NormCache<T> stats;
    std::vector<std::uint8_t> dropout_mask;
    TensorT<T> pre_act;
};

template <typename T>
TensorT<T> block_forward(const TensorT<T>& x, const LayerSpec& s,
                         const ParamBlockT<T>& p, bool training,
                         double dropout_rate, Rng* rng, BlockCache<T>* cache) {
    if (x.shape.size() != 4 || x.shape[0] != s.in_c) {
        throw ShapeMismatch("block " + s.name + ": bad input shape");
    }
    TensorT<T> conv = s.transposed
                          ? deconv3d_forward(x, p.w, p.b, s.stride, s.pad)
                          : conv3d_forward(x, p.w, p.b, s.stride, s.pad);
    TensorT<T> normed =
        s.norm ? norm_forward(conv, p.gamma, p.beta,
                              cache != nullptr ? &cache->stats : nullptr)
               : conv;
    TensorT<T> dropped;
    if (s.dropout && training && dropout_rate > 0.0) {
        if (rng == nullptr) {
            throw Error("block " + s.name + ": dropout in train mode needs an RNG");
        }
        std::vector<std::uint8_t> mask;
        dropped = dropout_forward(normed, dropout_rate, *rng, mask);
        if (cache != nullptr) cache->dropout_mask = std::move(mask);
    } else {
        dropped = normed;
        if (cache != nullptr) cache->dropout_mask.clear();
    }
    TensorT<T> out = activation_forward(dropped, s.act);
    if (cache != nullptr) {
        cache->input = x;
        cache->conv_out = std::move(conv);
        cache->pre_act = std::move(dropped);
    }
    return out;
}

// Returns the gradient w.r.t. the block input. Parameter gradients are
// accumulated into grad_accum when provided; a frozen pass uses nullptr.
template <typename T>
TensorT<T> block_backward(const TensorT<T>& grad_out, const LayerSpec& s,
                          const ParamBlockT<T>& p, const BlockCache<T>& cache,
                          double dropout_rate, ParamBlockT<T>* grad_accum) {
    TensorT<T> g = activation_backward(cache.pre_act, grad_out, s.act);
    if (s.dropout && !cache.dropout_mask.empty()) {
        g = dropout_backward(g, cache.dropout_mask, dropout_rate);
    }
    if (s.norm) {
        NormGrads<T> ng = norm_backward(cache.conv_out, p.gamma, g, cache.stats,
                                        grad_accum != nullptr);
        if (grad_accum != nullptr) {
            grad_accum->gamma.axpy(T(1), ng.gamma);
            grad_accum->beta.axpy(T(1), ng.beta);
        }
        g = std::move(ng.input);
    }
    ConvGrads<T> cg =
        s.transposed
            ? deconv3d_backward(cache.input, p.w, g, s.stride, s.pad,
                                grad_accum != nullptr)
            : conv3d_backward(cache.input, p.w, g, s.stride, s.pad,
                              grad_accum != nullptr);
    if (grad_accum != nullptr) {
        grad_accum->w.axpy(T(1), cg.weight);
        grad_accum->b.axpy(T(1), cg.bias);
    }
    return std::move(cg.input);
}

// ---------------------------------------------------------------------------
// Generator: e1..e5, d1..d4 with skip concatenations, output layer.
// ---------------------------------------------------------------------------

constexpr int kGenLayers = 10;
// Decoder layer index -> encoder layer whose output is concatenated onto the
// decoder layer's own output before the next layer runs.
inline int skip_source_for(int layer) {
    switch (layer) {
        case 5: return 3;  // d1 output is joined with e4
        case 6: return 2;
        case 7: return 1;
        case 8: return 0;
        default: return -1;
    }
}

template <typename T>
struct GenTrace {
    std::vector<BlockCache<T>> caches;        // per layer
    std::vector<TensorT<T>> encoder_outputs;  // e1..e5
};

template <typename T>
TensorT<T> generator_net_forward(const TensorT<T>& input,
                                 const std::vector<LayerSpec>& specs,
                                 const NetParamsT<T>& params, bool training,
                                 double dropout_rate, Rng* rng,
                                 GenTrace<T>* trace) {
    if (trace != nullptr) {
        trace->caches.assign(kGenLayers, BlockCache<T>{});
        trace->encoder_outputs.assign(5, TensorT<T>{});
    }
    TensorT<T> cur = input;
    std::vector<TensorT<T>> enc(5);
    for (int i = 0; i < 5; ++i) {
        cur = block_forward(cur, specs[static_cast<std::size_t>(i)],
                            params.blocks[static_cast<std::size_t>(i)], training,
                            dropout_rate, rng,
                            trace != nullptr ? &trace->caches[static_cast<std::size_t>(i)]
                                             : nullptr);
        enc[static_cast<std::size_t>(i)] = cur;
    }
    if (trace != nullptr) trace->encoder_outputs = enc;
    for (int i = 5; i < kGenLayers; ++i) {
        cur = block_forward(cur, specs[static_cast<std::size_t>(i)],
                            params.blocks[static_cast<std::size_t>(i)], training,
                            dropout_rate, rng,
                            trace != nullptr ? &trace->caches[static_cast<std::size_t>(i)]
                                             : nullptr);
        const int skip = skip_source_for(i);
        if (skip >= 0) {
            cur = concat_channels(cur, enc[static_cast<std::size_t>(skip)]);
        }
    }
    return cur;
}

template <typename T>
void generator_net_backward(const TensorT<T>& grad_output,
                            const std::vector<LayerSpec>& specs,
                            const NetParamsT<T>& params, const GenTrace<T>& trace,
                            double dropout_rate, NetParamsT<T>* grad_accum) {
    std::vector<TensorT<T>> enc_grad(5);
    TensorT<T> g = grad_output;
    for (int i = kGenLayers - 1; i >= 5; --i) {
        g = block_backward(g, specs[static_cast<std::size_t>(i)],
                           params.blocks[static_cast<std::size_t>(i)],
                           trace.caches[static_cast<std::size_t>(i)], dropout_rate,
                           grad_accum != nullptr
                               ? &grad_accum->blocks[static_cast<std::size_t>(i)]
                               : nullptr);
        // The input of decoder layer i was concat(prev_out, skip) for i >= 6.
        const int skip = skip_source_for(i - 1);
        if (i >= 6 && skip >= 0) {
            TensorT<T> own;
            TensorT<T> skip_part;
            const int own_c = specs[static_cast<std::size_t>(i - 1)].out_c;
            split_channels(g, own, skip_part, own_c);
            if (enc_grad[static_cast<std::size_t>(skip)].empty()) {
                enc_grad[static_cast<std::size_t>(skip)] = std::move(skip_part);
            } else {
                enc_grad[static_cast<std::size_t>(skip)].axpy(T(1), skip_part);
            }
            g = std::move(own);
        }
    }
    for (int i = 4; i >= 0; --i) {
        if (!enc_grad[static_cast<std::size_t>(i)].empty()) {
            g.axpy(T(1), enc_grad[static_cast<std::size_t>(i)]);
        }
        g = block_backward(g, specs[static_cast<std::size_t>(i)],
                           params.blocks[static_cast<std::size_t>(i)],
                           trace.caches[static_cast<std::size_t>(i)], dropout_rate,
                           grad_accum != nullptr
                               ? &grad_accum->blocks[static_cast<std::size_t>(i)]
                               : nullptr);
    }
}

// ---------------------------------------------------------------------------
// Discriminator: linear chain ending in mean-pooled patch logits.
// ---------------------------------------------------------------------------

template <typename T>
struct DiscTrace {
    std::vector<BlockCache<T>> caches;
    std::vector<int> patch_shape;
};

template <typename T>
T discriminator_net_forward(const TensorT<T>& pair,
                            const std::vector<LayerSpec>& specs,
                            const NetParamsT<T>& params, DiscTrace<T>* trace) {
    if (trace != nullptr) trace->caches.assign(specs.size(), BlockCache<T>{});
    TensorT<T> cur = pair;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        cur = block_forward(cur, specs[i], params.blocks[i], false, 0.0,
                            static_cast<Rng*>(nullptr),
                            trace != nullptr ? &trace->caches[i] : nullptr);
    }
    if (trace != nullptr) trace->patch_shape = cur.shape;
    T sum = T(0);
    for (T v : cur.data) sum += v;
    return sum / static_cast<T>(cur.numel());
}

// grad_logit is dL/d(mean patch logit); returns the gradient w.r.t. the
// 2-channel input pair.
template <typename T>
TensorT<T> discriminator_net_backward(T grad_logit,
                                      const std::vector<LayerSpec>& specs,
                                      const NetParamsT<T>& params,
                                      const DiscTrace<T>& trace,
                                      NetParamsT<T>* grad_accum) {
    TensorT<T> g(trace.patch_shape);
    const T v = grad_logit / static_cast<T>(g.numel());
    g.fill(v);
    for (int i = static_cast<int>(specs.size()) - 1; i >= 0; --i) {
        g = block_backward(g, specs[static_cast<std::size_t>(i)],
                           params.blocks[static_cast<std::size_t>(i)],
                           trace.caches[static_cast<std::size_t>(i)], 0.0,
                           grad_accum != nullptr
                               ? &grad_accum->blocks[static_cast<std::size_t>(i)]
                               : nullptr);
    }
    return g;
}

// Stochastic gradient step with momentum: v = mu * v - lr * g; p += v.
template <typename T>
void sgd_update(NetParamsT<T>& params, const NetParamsT<T>& grads,
                NetParamsT<T>& velocity, double lr, double momentum) {
    const auto step = [&](TensorT<T>& p, const TensorT<T>& g, TensorT<T>& v) {
        if (p.empty()) return;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            v.data[i] = static_cast<T>(momentum) * v.data[i] -
                        static_cast<T>(lr) * g.data[i];
            p.data[i] += v.data[i];
        }
    };
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
        step(params.blocks[i].w, grads.blocks[i].w, velocity.blocks[i].w);
        step(params.blocks[i].b, grads.blocks[i].b, velocity.blocks[i].b);
        step(params.blocks[i].gamma, grads.blocks[i].gamma,
             velocity.blocks[i].gamma);
        step(params.blocks[i].beta, grads.blocks[i].beta, velocity.blocks[i].beta);
    }
}

}  // namespace ctforge::nn
