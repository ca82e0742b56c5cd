#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctforge/nn/tensor.hpp"
#include "ctforge/rng.hpp"

namespace ctforge::nn {

constexpr double kNormEpsilon = 1e-5;
constexpr double kLeakySlope = 0.2;

enum class Act { None, LeakyRelu, Relu, Tanh, Sigmoid };

// ---------------------------------------------------------------------------
// 3D convolution, stride s, symmetric zero padding p.
// input (Ci, D, H, W), weight (Co, Ci, k, k, k), bias (Co).
// ---------------------------------------------------------------------------

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void check_conv_shapes(const TensorT<T>& input, const TensorT<T>& weight,
                       const TensorT<T>& bias, bool transposed) {
    if (input.shape.size() != 4 || weight.shape.size() != 5 ||
        bias.shape.size() != 1) {
        throw ShapeMismatch("conv3d: bad tensor ranks");
    }
    const int ci = transposed ? weight.shape[0] : weight.shape[1];
    const int co = transposed ? weight.shape[1] : weight.shape[0];
    if (input.shape[0] != ci) throw ShapeMismatch("conv3d: channel mismatch");
    if (bias.shape[0] != co) throw ShapeMismatch("conv3d: bias mismatch");
    if (weight.shape[2] != weight.shape[3] || weight.shape[2] != weight.shape[4]) {
        throw ShapeMismatch("conv3d: kernel must be cubic");
    }
}

template <typename T>
TensorT<T> conv3d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                          const TensorT<T>& bias, int stride, int pad) {
    check_conv_shapes(input, weight, bias, false);
    const int ci = weight.shape[1];
    const int co = weight.shape[0];
    const int k = weight.shape[2];
    const int d = input.shape[1];
    const int h = input.shape[2];
    const int w = input.shape[3];
    const int od = conv_out_dim(d, k, stride, pad);
    const int oh = conv_out_dim(h, k, stride, pad);
    const int ow = conv_out_dim(w, k, stride, pad);
    if (od <= 0 || oh <= 0 || ow <= 0) {
        throw ShapeMismatch("conv3d: output would be empty");
    }

    TensorT<T> out({co, od, oh, ow});
    const std::size_t in_hw = static_cast<std::size_t>(h) * w;
    const std::size_t in_chw = static_cast<std::size_t>(d) * in_hw;
    const std::size_t k2 = static_cast<std::size_t>(k) * k;
    const std::size_t k3 = k2 * k;

    std::size_t oi = 0;
    for (int c = 0; c < co; ++c) {
        const T* wc = weight.data.data() + static_cast<std::size_t>(c) * ci * k3;
        const T bv = bias.data[static_cast<std::size_t>(c)];
        for (int z = 0; z < od; ++z) {
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x, ++oi) {
                    T acc = bv;
                    for (int ic = 0; ic < ci; ++ic) {
                        const T* in_c = input.data.data() + ic * in_chw;
                        const T* w_ic = wc + static_cast<std::size_t>(ic) * k3;
                        for (int kz = 0; kz < k; ++kz) {
                            const int iz = z * stride - pad + kz;
                            if (iz < 0 || iz >= d) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = y * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                const T* row =
                                    in_c + static_cast<std::size_t>(iz) * in_hw +
                                    static_cast<std::size_t>(iy) * w;
                                const T* wrow = w_ic + static_cast<std::size_t>(kz) * k2 +
                                                static_cast<std::size_t>(ky) * k;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = x * stride - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    acc += row[ix] * wrow[kx];
                                }
                            }
                        }
                    }
                    out.data[oi] = acc;
                }
            }
        }
    }
    return out;
}

template <typename T>
struct ConvGrads {
    TensorT<T> input;
    TensorT<T> weight;
    TensorT<T> bias;
};

// Gradients w.r.t. input, weight, and bias. When param_grads is false only
// the input gradient is produced (used when the error is back-propagated
// through a frozen network).
template <typename T>
ConvGrads<T> conv3d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                             const TensorT<T>& grad_out, int stride, int pad,
                             bool param_grads = true) {
    const int ci = weight.shape[1];
    const int co = weight.shape[0];
    const int k = weight.shape[2];
    const int d = input.shape[1];
    const int h = input.shape[2];
    const int w = input.shape[3];
    const int od = grad_out.shape[1];
    const int oh = grad_out.shape[2];
    const int ow = grad_out.shape[3];

    ConvGrads<T> g;
    g.input = input.zeros_like();
    if (param_grads) {
        g.weight = weight.zeros_like();
        g.bias = TensorT<T>({co});
    }

    const std::size_t in_hw = static_cast<std::size_t>(h) * w;
    const std::size_t in_chw = static_cast<std::size_t>(d) * in_hw;
    const std::size_t k2 = static_cast<std::size_t>(k) * k;
    const std::size_t k3 = k2 * k;

    std::size_t oi = 0;
    for (int c = 0; c < co; ++c) {
        const T* wc = weight.data.data() + static_cast<std::size_t>(c) * ci * k3;
        T* gwc = param_grads
                     ? g.weight.data.data() + static_cast<std::size_t>(c) * ci * k3
                     : nullptr;
        T gb = T(0);
        for (int z = 0; z < od; ++z) {
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x, ++oi) {
                    const T go = grad_out.data[oi];
                    if (go == T(0)) continue;
                    gb += go;
                    for (int ic = 0; ic < ci; ++ic) {
                        const T* in_c = input.data.data() + ic * in_chw;
                        T* gin_c = g.input.data.data() + ic * in_chw;
                        const T* w_ic = wc + static_cast<std::size_t>(ic) * k3;
                        T* gw_ic =
                            param_grads ? gwc + static_cast<std::size_t>(ic) * k3
                                        : nullptr;
                        for (int kz = 0; kz < k; ++kz) {
                            const int iz = z * stride - pad + kz;
                            if (iz < 0 || iz >= d) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = y * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                const std::size_t base =
                                    static_cast<std::size_t>(iz) * in_hw +
                                    static_cast<std::size_t>(iy) * w;
                                const std::size_t wbase =
                                    static_cast<std::size_t>(kz) * k2 +
                                    static_cast<std::size_t>(ky) * k;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = x * stride - pad + kx;
                                    if (ix < 0 || ix >= w) continue;
                                    gin_c[base + ix] += go * w_ic[wbase + kx];
                                    if (param_grads) {
                                        gw_ic[wbase + kx] += go * in_c[base + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if (param_grads) g.bias.data[static_cast<std::size_t>(c)] = gb;
    }
    return g;
}

// ---------------------------------------------------------------------------
// 3D transposed convolution ("deconvolution").
// input (Ci, D, H, W), weight (Ci, Co, k, k, k), bias (Co).
// out_dim = (in - 1) * stride - 2 * pad + k; k=4, s=2, p=1 doubles the grid.
// ---------------------------------------------------------------------------

inline int deconv_out_dim(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

template <typename T>
TensorT<T> deconv3d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                            const TensorT<T>& bias, int stride, int pad) {
    check_conv_shapes(input, weight, bias, true);
    const int ci = weight.shape[0];
    const int co = weight.shape[1];
    const int k = weight.shape[2];
    const int d = input.shape[1];
    const int h = input.shape[2];
    const int w = input.shape[3];
    const int od = deconv_out_dim(d, k, stride, pad);
    const int oh = deconv_out_dim(h, k, stride, pad);
    const int ow = deconv_out_dim(w, k, stride, pad);
    if (od <= 0 || oh <= 0 || ow <= 0) {
        throw ShapeMismatch("deconv3d: output would be empty");
    }

    TensorT<T> out({co, od, oh, ow});
    const std::size_t out_hw = static_cast<std::size_t>(oh) * ow;
    const std::size_t out_chw = static_cast<std::size_t>(od) * out_hw;
    const std::size_t k2 = static_cast<std::size_t>(k) * k;
    const std::size_t k3 = k2 * k;

    for (int c = 0; c < co; ++c) {
        const T bv = bias.data[static_cast<std::size_t>(c)];
        T* oc = out.data.data() + c * out_chw;
        for (std::size_t i = 0; i < out_chw; ++i) oc[i] = bv;
    }

    std::size_t ii = 0;
    for (int ic = 0; ic < ci; ++ic) {
        const T* w_ic =
            weight.data.data() + static_cast<std::size_t>(ic) * co * k3;
        for (int z = 0; z < d; ++z) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x, ++ii) {
                    const T iv = input.data[ii];
                    if (iv == T(0)) continue;
                    for (int c = 0; c < co; ++c) {
                        T* oc = out.data.data() + c * out_chw;
                        const T* wk = w_ic + static_cast<std::size_t>(c) * k3;
                        for (int kz = 0; kz < k; ++kz) {
                            const int oz = z * stride - pad + kz;
                            if (oz < 0 || oz >= od) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int oy = y * stride - pad + ky;
                                if (oy < 0 || oy >= oh) continue;
                                T* row = oc + static_cast<std::size_t>(oz) * out_hw +
                                         static_cast<std::size_t>(oy) * ow;
                                const T* wrow = wk + static_cast<std::size_t>(kz) * k2 +
                                                static_cast<std::size_t>(ky) * k;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ox = x * stride - pad + kx;
                                    if (ox < 0 || ox >= ow) continue;
                                    row[ox] += iv * wrow[kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> deconv3d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                               const TensorT<T>& grad_out, int stride, int pad,
                               bool param_grads = true) {
    const int ci = weight.shape[0];
    const int co = weight.shape[1];
    const int k = weight.shape[2];
    const int d = input.shape[1];
    const int h = input.shape[2];
    const int w = input.shape[3];
    const int od = grad_out.shape[1];
    const int oh = grad_out.shape[2];
    const int ow = grad_out.shape[3];

    ConvGrads<T> g;
    g.input = input.zeros_like();
    if (param_grads) {
        g.weight = weight.zeros_like();
        g.bias = TensorT<T>({co});
        const std::size_t out_hw = static_cast<std::size_t>(oh) * ow;
        const std::size_t out_chw = static_cast<std::size_t>(od) * out_hw;
        for (int c = 0; c < co; ++c) {
            T acc = T(0);
            const T* go_c = grad_out.data.data() + c * out_chw;
            for (std::size_t i = 0; i < out_chw; ++i) acc += go_c[i];
            g.bias.data[static_cast<std::size_t>(c)] = acc;
        }
    }

    const std::size_t out_hw = static_cast<std::size_t>(oh) * ow;
    const std::size_t out_chw = static_cast<std::size_t>(od) * out_hw;
    const std::size_t k2 = static_cast<std::size_t>(k) * k;
    const std::size_t k3 = k2 * k;

    std::size_t ii = 0;
    for (int ic = 0; ic < ci; ++ic) {
        const T* w_ic =
            weight.data.data() + static_cast<std::size_t>(ic) * co * k3;
        T* gw_ic = param_grads
                       ? g.weight.data.data() + static_cast<std::size_t>(ic) * co * k3
                       : nullptr;
        for (int z = 0; z < d; ++z) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x, ++ii) {
                    const T iv = input.data[ii];
                    T gin = T(0);
                    for (int c = 0; c < co; ++c) {
                        const T* go_c = grad_out.data.data() + c * out_chw;
                        const T* wk = w_ic + static_cast<std::size_t>(c) * k3;
                        T* gwk = param_grads
                                     ? gw_ic + static_cast<std::size_t>(c) * k3
                                     : nullptr;
                        for (int kz = 0; kz < k; ++kz) {
                            const int oz = z * stride - pad + kz;
                            if (oz < 0 || oz >= od) continue;
                            for (int ky = 0; ky < k; ++ky) {
                                const int oy = y * stride - pad + ky;
                                if (oy < 0 || oy >= oh) continue;
                                const T* row = go_c +
                                               static_cast<std::size_t>(oz) * out_hw +
                                               static_cast<std::size_t>(oy) * ow;
                                const std::size_t wbase =
                                    static_cast<std::size_t>(kz) * k2 +
                                    static_cast<std::size_t>(ky) * k;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ox = x * stride - pad + kx;
                                    if (ox < 0 || ox >= ow) continue;
                                    gin += row[ox] * wk[wbase + kx];
                                    if (param_grads) {
                                        gwk[wbase + kx] += row[ox] * iv;
                                    }
                                }
                            }
                        }
                    }
                    g.input.data[ii] = gin;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Instance normalization: per-channel statistics over the spatial dims.
// ---------------------------------------------------------------------------

template <typename T>
struct NormCache {
    std::vector<T> mean;
    std::vector<T> inv_std;
};

template <typename T>
TensorT<T> norm_forward(const TensorT<T>& input, const TensorT<T>& gamma,
                        const TensorT<T>& beta, NormCache<T>* cache = nullptr) {
    if (input.shape.size() != 4) throw ShapeMismatch("norm: input must be 4-D");
    const int c = input.shape[0];
    if (gamma.shape != std::vector<int>{c} || beta.shape != std::vector<int>{c}) {
        throw ShapeMismatch("norm: gamma/beta must have one value per channel");
    }
    const std::size_t n =
        input.numel() / static_cast<std::size_t>(c);
    TensorT<T> out = input.zeros_like();
    if (cache != nullptr) {
        cache->mean.assign(static_cast<std::size_t>(c), T(0));
        cache->inv_std.assign(static_cast<std::size_t>(c), T(0));
    }
    for (int ch = 0; ch < c; ++ch) {
        const T* x = input.data.data() + static_cast<std::size_t>(ch) * n;
        T* y = out.data.data() + static_cast<std::size_t>(ch) * n;
        T mean = T(0);
        for (std::size_t i = 0; i < n; ++i) mean += x[i];
        mean /= static_cast<T>(n);
        T var = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = x[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(n);
        const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kNormEpsilon));
        const T gm = gamma.data[static_cast<std::size_t>(ch)];
        const T bt = beta.data[static_cast<std::size_t>(ch)];
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = (x[i] - mean) * inv_std * gm + bt;
        }
        if (cache != nullptr) {
            cache->mean[static_cast<std::size_t>(ch)] = mean;
            cache->inv_std[static_cast<std::size_t>(ch)] = inv_std;
        }
    }
    return out;
}

template <typename T>
struct NormGrads {
    TensorT<T> input;
    TensorT<T> gamma;
    TensorT<T> beta;
};

template <typename T>
NormGrads<T> norm_backward(const TensorT<T>& input, const TensorT<T>& gamma,
                           const TensorT<T>& grad_out, const NormCache<T>& cache,
                           bool param_grads = true) {
    const int c = input.shape[0];
    const std::size_t n = input.numel() / static_cast<std::size_t>(c);
    NormGrads<T> g;
    g.input = input.zeros_like();
    if (param_grads) {
        g.gamma = TensorT<T>({c});
        g.beta = TensorT<T>({c});
    }
    for (int ch = 0; ch < c; ++ch) {
        const T* x = input.data.data() + static_cast<std::size_t>(ch) * n;
        const T* go = grad_out.data.data() + static_cast<std::size_t>(ch) * n;
        T* gi = g.input.data.data() + static_cast<std::size_t>(ch) * n;
        const T mean = cache.mean[static_cast<std::size_t>(ch)];
        const T inv_std = cache.inv_std[static_cast<std::size_t>(ch)];
        const T gm = gamma.data[static_cast<std::size_t>(ch)];

        T sum_go = T(0);
        T sum_go_xhat = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T xhat = (x[i] - mean) * inv_std;
            sum_go += go[i];
            sum_go_xhat += go[i] * xhat;
        }
        const T inv_n = T(1) / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T xhat = (x[i] - mean) * inv_std;
            gi[i] = gm * inv_std *
                    (go[i] - inv_n * sum_go - xhat * inv_n * sum_go_xhat);
        }
        if (param_grads) {
            g.gamma.data[static_cast<std::size_t>(ch)] = sum_go_xhat;
            g.beta.data[static_cast<std::size_t>(ch)] = sum_go;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Activations (elementwise) and dropout.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> activation_forward(const TensorT<T>& x, Act act) {
    TensorT<T> out = x;
    switch (act) {
        case Act::None:
            break;
        case Act::LeakyRelu:
            for (T& v : out.data) {
                if (v < T(0)) v *= static_cast<T>(kLeakySlope);
            }
            break;
        case Act::Relu:
            for (T& v : out.data) {
                if (v < T(0)) v = T(0);
            }
            break;
        case Act::Tanh:
            for (T& v : out.data) v = std::tanh(v);
            break;
        case Act::Sigmoid:
            for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
            break;
    }
    return out;
}

template <typename T>
TensorT<T> activation_backward(const TensorT<T>& x, const TensorT<T>& grad_out,
                               Act act) {
    if (!x.same_shape(grad_out)) {
        throw ShapeMismatch("activation_backward: shape mismatch");
    }
    TensorT<T> g = grad_out;
    switch (act) {
        case Act::None:
            break;
        case Act::LeakyRelu:
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                if (x.data[i] < T(0)) g.data[i] *= static_cast<T>(kLeakySlope);
            }
            break;
        case Act::Relu:
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                if (x.data[i] < T(0)) g.data[i] = T(0);
            }
            break;
        case Act::Tanh:
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const T t = std::tanh(x.data[i]);
                g.data[i] *= (T(1) - t * t);
            }
            break;
        case Act::Sigmoid:
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const T s = T(1) / (T(1) + std::exp(-x.data[i]));
                g.data[i] *= s * (T(1) - s);
            }
            break;
    }
    return g;
}

// Inverted dropout: kept units are scaled by 1/(1-rate) so eval mode is the
// identity.
template <typename T>
TensorT<T> dropout_forward(const TensorT<T>& x, double rate, Rng& rng,
                           std::vector<std::uint8_t>& mask_out) {
    if (rate <= 0.0) {
        mask_out.assign(x.numel(), 1);
        return x;
    }
    mask_out.resize(x.numel());
    TensorT<T> out = x;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const bool keep = rng.uniform() >= rate;
        mask_out[i] = keep ? 1 : 0;
        out.data[i] = keep ? out.data[i] * scale : T(0);
    }
    return out;
}

template <typename T>
TensorT<T> dropout_backward(const TensorT<T>& grad_out,
                            const std::vector<std::uint8_t>& mask, double rate) {
    TensorT<T> g = grad_out;
    if (rate <= 0.0) return g;
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        g.data[i] = mask[i] != 0 ? g.data[i] * scale : T(0);
    }
    return g;
}

// Numerically stable binary cross-entropy on a raw logit.
template <typename T>
T bce_loss_from_logit(T logit, T label) {
    const T neg_abs = logit < T(0) ? logit : -logit;
    return std::max(logit, T(0)) - logit * label +
           std::log1p(std::exp(neg_abs));
}

template <typename T>
T bce_grad_from_logit(T logit, T label) {
    const T s = T(1) / (T(1) + std::exp(-logit));
    return s - label;
}

}  // namespace ctforge::nn
