#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vcqe/autodiff.hpp"
#include "vcqe/ops.hpp"
#include "vcqe/rng.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

template <typename T>
struct NamedParam {
    std::string name;
    Var<T> var;
};

template <typename T>
struct NamedBuffer {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
void set_trainable(std::vector<NamedParam<T>>& params, bool trainable) {
    for (auto& p : params) p.var.set_requires_grad(trainable);
}

template <typename T>
Tensor<T> he_normal(std::vector<int> dims, int fan_in, Rng& rng) {
    Tensor<T> t(std::move(dims));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
    return t;
}

template <typename T>
struct Conv2d {
    Var<T> w, b;
    int stride = 1;

    Conv2d() = default;
    Conv2d(int kernel, int cin, int cout, int stride_, Rng& rng, bool zero_init = false)
        : stride(stride_) {
        check(kernel % 2 == 1, "Conv2d: kernel must be odd");
        Tensor<T> wt = zero_init ? Tensor<T>({kernel, kernel, cin, cout})
                                 : he_normal<T>({kernel, kernel, cin, cout}, kernel * kernel * cin, rng);
        w = Var<T>(std::move(wt), true);
        b = Var<T>(Tensor<T>({cout}), true);
    }

    Var<T> operator()(const Var<T>& x) const { return conv2d(x, w, b, stride); }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

template <typename T>
struct ConvTranspose2d {
    Var<T> w, b;
    int stride = 2;

    ConvTranspose2d() = default;
    ConvTranspose2d(int kernel, int cin, int cout, int stride_, Rng& rng) : stride(stride_) {
        check(kernel >= stride && (kernel - stride) % 2 == 0,
              "ConvTranspose2d: kernel " + std::to_string(kernel) + " / stride " +
                  std::to_string(stride) + " cannot produce exact stride*H output");
        w = Var<T>(he_normal<T>({kernel, kernel, cin, cout}, kernel * kernel * cin, rng), true);
        b = Var<T>(Tensor<T>({cout}), true);
    }

    // Per-channel bilinear interpolation kernel scaled by `value_scale`; used
    // for flow upsampling so displacement values double with the resolution.
    static ConvTranspose2d bilinear_upsample2(int channels, T value_scale) {
        ConvTranspose2d layer;
        layer.stride = 2;
        Tensor<T> wt({4, 4, channels, channels});
        const T taps[4] = {T(0.25), T(0.75), T(0.75), T(0.25)};
        for (int ky = 0; ky < 4; ++ky)
            for (int kx = 0; kx < 4; ++kx)
                for (int c = 0; c < channels; ++c)
                    wt.at4(ky, kx, c, c) = taps[ky] * taps[kx] * value_scale;
        layer.w = Var<T>(std::move(wt), true);
        layer.b = Var<T>(Tensor<T>({channels}), true);
        return layer;
    }

    Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, w, b, stride); }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + ".w", w});
        out.push_back({prefix + ".b", b});
    }
};

template <typename T>
struct BatchNorm2d {
    Var<T> gamma, beta;
    Tensor<T> running_mean, running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);

    BatchNorm2d() = default;
    explicit BatchNorm2d(int channels) {
        gamma = Var<T>(Tensor<T>({channels}, T(1)), true);
        beta = Var<T>(Tensor<T>({channels}), true);
        running_mean = Tensor<T>({channels});
        running_var = Tensor<T>({channels}, T(1));
    }

    Var<T> operator()(const Var<T>& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, training, momentum, eps);
    }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }

    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
        out.push_back({prefix + ".running_mean", &running_mean});
        out.push_back({prefix + ".running_var", &running_var});
    }
};

// conv3x3 -> ReLU -> conv3x3 with additive identity skip; no normalization.
template <typename T>
struct ResBlock {
    Conv2d<T> c1, c2;

    ResBlock() = default;
    ResBlock(int channels, Rng& rng)
        : c1(3, channels, channels, 1, rng), c2(3, channels, channels, 1, rng) {}

    Var<T> operator()(const Var<T>& x) const { return add(x, c2(relu(c1(x)))); }

    void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
        c1.collect(prefix + ".c1", out);
        c2.collect(prefix + ".c2", out);
    }
};

template <typename T>
double grad_norm(const std::vector<NamedParam<T>>& params) {
    double s = 0;
    for (const auto& p : params) {
        if (!p.var.has_grad()) continue;
        const Tensor<T>& g = p.var.grad();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            s += static_cast<double>(g[i]) * static_cast<double>(g[i]);
    }
    return std::sqrt(s);
}

}  // namespace vcqe
