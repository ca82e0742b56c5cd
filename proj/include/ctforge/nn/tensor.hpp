#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ctforge/error.hpp"

namespace ctforge::nn {

// Dense row-major tensor. Activations are (C, D, H, W); convolution weights
// are (Cout, Cin, k, k, k); transposed-convolution weights are
// (Cin, Cout, k, k, k).
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), T(0));
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeMismatch("tensor dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    TensorT zeros_like() const {
        TensorT t;
        t.shape = shape;
        t.data.assign(data.size(), T(0));
        return t;
    }

    // y += a * x, elementwise over equal shapes.
    void axpy(T a, const TensorT& x) {
        if (!same_shape(x)) throw ShapeMismatch("axpy: shape mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += a * x.data[i];
    }
};

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape.size() != 4 || b.shape.size() != 4) {
        throw ShapeMismatch("concat: activations must be 4-D");
    }
    for (int i = 1; i < 4; ++i) {
        if (a.shape[static_cast<std::size_t>(i)] !=
            b.shape[static_cast<std::size_t>(i)]) {
            throw ShapeMismatch("concat: spatial dims differ");
        }
    }
    TensorT<T> out({a.shape[0] + b.shape[0], a.shape[1], a.shape[2], a.shape[3]});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

template <typename T>
void split_channels(const TensorT<T>& joined, TensorT<T>& a, TensorT<T>& b,
                    int a_channels) {
    const int total = joined.shape[0];
    a = TensorT<T>({a_channels, joined.shape[1], joined.shape[2], joined.shape[3]});
    b = TensorT<T>(
        {total - a_channels, joined.shape[1], joined.shape[2], joined.shape[3]});
    std::copy(joined.data.begin(), joined.data.begin() + a.data.size(),
              a.data.begin());
    std::copy(joined.data.begin() + a.data.size(), joined.data.end(),
              b.data.begin());
}

}  // namespace ctforge::nn
