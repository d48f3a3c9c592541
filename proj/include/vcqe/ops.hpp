#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "vcqe/autodiff.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

// 2D convolution over an H x W x Cin image, weights KH x KW x Cin x Cout,
// symmetric padding (k-1)/2 so the output is ceil(H/stride) x ceil(W/stride).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
    const Tensor<T>& X = x.value();
    const Tensor<T>& W = w.value();
    check(X.ndim() == 3, "conv2d: input must be H x W x C, got " + X.dims_str());
    check(W.ndim() == 4, "conv2d: weight must be KH x KW x Cin x Cout");
    const int h = X.dim(0), wd = X.dim(1), cin = X.dim(2);
    const int k = W.dim(0), cout = W.dim(3);
    check(W.dim(1) == k, "conv2d: kernel must be square");
    check(k % 2 == 1, "conv2d: kernel must be odd");
    check(stride >= 1, "conv2d: bad stride");
    check(W.dim(2) == cin, "conv2d: channel mismatch, input has " + std::to_string(cin) +
                               " channels, weight expects " + std::to_string(W.dim(2)));
    const bool has_bias = b.defined() && b.numel() > 0;
    if (has_bias) check(b.value().ndim() == 1 && b.value().dim(0) == cout, "conv2d: bias shape");

    const int pad = (k - 1) / 2;
    const int oh = (h - 1) / stride + 1;
    const int ow = (wd - 1) / stride + 1;

    Tensor<T> out({oh, ow, cout});
    {
        const T* xp = X.data();
        const T* wp = W.data();
        const T* bp = has_bias ? b.value().data() : nullptr;
        T* op = out.data();
        for (int yo = 0; yo < oh; ++yo) {
            for (int xo = 0; xo < ow; ++xo) {
                T* acc = op + (static_cast<std::int64_t>(yo) * ow + xo) * cout;
                if (bp)
                    for (int co = 0; co < cout; ++co) acc[co] = bp[co];
                for (int ky = 0; ky < k; ++ky) {
                    const int yi = yo * stride + ky - pad;
                    if (yi < 0 || yi >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int xi = xo * stride + kx - pad;
                        if (xi < 0 || xi >= wd) continue;
                        const T* xr = xp + (static_cast<std::int64_t>(yi) * wd + xi) * cin;
                        const T* wr = wp + static_cast<std::int64_t>(ky * k + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T xv = xr[ci];
                            const T* wc = wr + static_cast<std::int64_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) acc[co] += xv * wc[co];
                        }
                    }
                }
            }
        }
    }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = has_bias ? b.node() : nullptr;
    std::vector<Var<T>> parents = has_bias ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return Var<T>::make_result(
        std::move(out), std::move(parents),
        [xn, wn, bn, stride, pad, h, wd, cin, k, cout, oh, ow](Node<T>& node) {
            const T* gp = node.grad.data();
            const bool need_dx = xn->requires_grad;
            const bool need_dw = wn->requires_grad;
            const bool need_db = bn && bn->requires_grad;
            T* dxp = need_dx ? xn->ensure_grad().data() : nullptr;
            T* dwp = need_dw ? wn->ensure_grad().data() : nullptr;
            T* dbp = need_db ? bn->ensure_grad().data() : nullptr;
            const T* xp = xn->value.data();
            const T* wp = wn->value.data();
            for (int yo = 0; yo < oh; ++yo) {
                for (int xo = 0; xo < ow; ++xo) {
                    const T* gr = gp + (static_cast<std::int64_t>(yo) * ow + xo) * cout;
                    if (dbp)
                        for (int co = 0; co < cout; ++co) dbp[co] += gr[co];
                    for (int ky = 0; ky < k; ++ky) {
                        const int yi = yo * stride + ky - pad;
                        if (yi < 0 || yi >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xi = xo * stride + kx - pad;
                            if (xi < 0 || xi >= wd) continue;
                            const std::int64_t xoff = (static_cast<std::int64_t>(yi) * wd + xi) * cin;
                            const std::int64_t woff = static_cast<std::int64_t>(ky * k + kx) * cin * cout;
                            if (dwp) {
                                const T* xr = xp + xoff;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T xv = xr[ci];
                                    T* dwr = dwp + woff + static_cast<std::int64_t>(ci) * cout;
                                    for (int co = 0; co < cout; ++co) dwr[co] += xv * gr[co];
                                }
                            }
                            if (dxp) {
                                T* dxr = dxp + xoff;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T* wc = wp + woff + static_cast<std::int64_t>(ci) * cout;
                                    T s = T(0);
                                    for (int co = 0; co < cout; ++co) s += wc[co] * gr[co];
                                    dxr[ci] += s;
                                }
                            }
                        }
                    }
                }
            }
        });
}

// Transposed convolution producing exactly stride*H x stride*W output.
// Requires kernel >= stride with (kernel - stride) even; padding is
// (kernel - stride) / 2.
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
    const Tensor<T>& X = x.value();
    const Tensor<T>& W = w.value();
    check(X.ndim() == 3, "conv_transpose2d: input must be H x W x C");
    check(W.ndim() == 4, "conv_transpose2d: weight must be KH x KW x Cin x Cout");
    const int h = X.dim(0), wd = X.dim(1), cin = X.dim(2);
    const int k = W.dim(0), cout = W.dim(3);
    check(W.dim(1) == k, "conv_transpose2d: kernel must be square");
    check(stride >= 1, "conv_transpose2d: bad stride");
    check(k >= stride && (k - stride) % 2 == 0,
          "conv_transpose2d: kernel/stride pair cannot produce exact stride*H output");
    check(W.dim(2) == cin, "conv_transpose2d: channel mismatch");
    const bool has_bias = b.defined() && b.numel() > 0;
    if (has_bias) check(b.value().ndim() == 1 && b.value().dim(0) == cout, "conv_transpose2d: bias shape");

    const int pad = (k - stride) / 2;
    const int oh = h * stride;
    const int ow = wd * stride;

    Tensor<T> out({oh, ow, cout});
    {
        const T* xp = X.data();
        const T* wp = W.data();
        T* op = out.data();
        if (has_bias) {
            const T* bp = b.value().data();
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i)
                for (int co = 0; co < cout; ++co) op[i * cout + co] = bp[co];
        }
        for (int yi = 0; yi < h; ++yi) {
            for (int xi = 0; xi < wd; ++xi) {
                const T* xr = xp + (static_cast<std::int64_t>(yi) * wd + xi) * cin;
                for (int ky = 0; ky < k; ++ky) {
                    const int yo = yi * stride + ky - pad;
                    if (yo < 0 || yo >= oh) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int xo = xi * stride + kx - pad;
                        if (xo < 0 || xo >= ow) continue;
                        T* outr = op + (static_cast<std::int64_t>(yo) * ow + xo) * cout;
                        const T* wr = wp + static_cast<std::int64_t>(ky * k + kx) * cin * cout;
                        for (int ci = 0; ci < cin; ++ci) {
                            const T xv = xr[ci];
                            const T* wc = wr + static_cast<std::int64_t>(ci) * cout;
                            for (int co = 0; co < cout; ++co) outr[co] += xv * wc[co];
                        }
                    }
                }
            }
        }
    }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = has_bias ? b.node() : nullptr;
    std::vector<Var<T>> parents = has_bias ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    return Var<T>::make_result(
        std::move(out), std::move(parents),
        [xn, wn, bn, stride, pad, h, wd, cin, k, cout, oh, ow](Node<T>& node) {
            const T* gp = node.grad.data();
            const bool need_dx = xn->requires_grad;
            const bool need_dw = wn->requires_grad;
            const bool need_db = bn && bn->requires_grad;
            T* dxp = need_dx ? xn->ensure_grad().data() : nullptr;
            T* dwp = need_dw ? wn->ensure_grad().data() : nullptr;
            if (need_db) {
                T* dbp = bn->ensure_grad().data();
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i)
                    for (int co = 0; co < cout; ++co) dbp[co] += gp[i * cout + co];
            }
            if (!need_dx && !need_dw) return;
            const T* xp = xn->value.data();
            const T* wp = wn->value.data();
            for (int yi = 0; yi < h; ++yi) {
                for (int xi = 0; xi < wd; ++xi) {
                    const std::int64_t xoff = (static_cast<std::int64_t>(yi) * wd + xi) * cin;
                    for (int ky = 0; ky < k; ++ky) {
                        const int yo = yi * stride + ky - pad;
                        if (yo < 0 || yo >= oh) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int xo = xi * stride + kx - pad;
                            if (xo < 0 || xo >= ow) continue;
                            const T* gr = gp + (static_cast<std::int64_t>(yo) * ow + xo) * cout;
                            const std::int64_t woff = static_cast<std::int64_t>(ky * k + kx) * cin * cout;
                            if (dwp) {
                                const T* xr = xp + xoff;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T xv = xr[ci];
                                    T* dwr = dwp + woff + static_cast<std::int64_t>(ci) * cout;
                                    for (int co = 0; co < cout; ++co) dwr[co] += xv * gr[co];
                                }
                            }
                            if (dxp) {
                                T* dxr = dxp + xoff;
                                for (int ci = 0; ci < cin; ++ci) {
                                    const T* wc = wp + woff + static_cast<std::int64_t>(ci) * cout;
                                    T s = T(0);
                                    for (int co = 0; co < cout; ++co) s += wc[co] * gr[co];
                                    dxr[ci] += s;
                                }
                            }
                        }
                    }
                }
            }
        });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    const Tensor<T>& X = x.value();
    Tensor<T> out(X.dims());
    for (std::int64_t i = 0; i < X.numel(); ++i) out[i] = X[i] > T(0) ? X[i] : T(0);
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn](Node<T>& node) {
        if (!xn->requires_grad) return;
        Tensor<T>& dx = xn->ensure_grad();
        const T* gp = node.grad.data();
        const T* xp = xn->value.data();
        for (std::int64_t i = 0; i < node.grad.numel(); ++i)
            if (xp[i] > T(0)) dx[i] += gp[i];
    });
}

// Per-channel normalization over the spatial extent, then affine transform.
// Training mode normalizes with batch statistics and updates the running
// stats in place; eval mode normalizes with the running stats.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                  T momentum = T(0.1), T eps = T(1e-5)) {
    const Tensor<T>& X = x.value();
    check(X.ndim() == 3, "batch_norm: input must be H x W x C");
    const int h = X.dim(0), w = X.dim(1), c = X.dim(2);
    check(gamma.value().ndim() == 1 && gamma.value().dim(0) == c, "batch_norm: gamma shape");
    check(beta.value().ndim() == 1 && beta.value().dim(0) == c, "batch_norm: beta shape");
    check(running_mean.dim(0) == c && running_var.dim(0) == c, "batch_norm: running stats shape");
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    check(n > 0, "batch_norm: empty input");

    Tensor<T> mean({c}), var({c});
    if (training) {
        for (std::int64_t i = 0; i < n; ++i)
            for (int ci = 0; ci < c; ++ci) mean[ci] += X[i * c + ci];
        for (int ci = 0; ci < c; ++ci) mean[ci] /= T(n);
        for (std::int64_t i = 0; i < n; ++i)
            for (int ci = 0; ci < c; ++ci) {
                const T d = X[i * c + ci] - mean[ci];
                var[ci] += d * d;
            }
        for (int ci = 0; ci < c; ++ci) var[ci] /= T(n);
        for (int ci = 0; ci < c; ++ci) {
            running_mean[ci] = (T(1) - momentum) * running_mean[ci] + momentum * mean[ci];
            running_var[ci] = (T(1) - momentum) * running_var[ci] + momentum * var[ci];
        }
    } else {
        mean = running_mean;
        var = running_var;
    }

    Tensor<T> invstd({c});
    for (int ci = 0; ci < c; ++ci) invstd[ci] = T(1) / std::sqrt(var[ci] + eps);

    Tensor<T> xhat(X.dims());
    Tensor<T> out(X.dims());
    const T* gp_ = gamma.value().data();
    const T* bp_ = beta.value().data();
    for (std::int64_t i = 0; i < n; ++i)
        for (int ci = 0; ci < c; ++ci) {
            const T xh = (X[i * c + ci] - mean[ci]) * invstd[ci];
            xhat[i * c + ci] = xh;
            out[i * c + ci] = gp_[ci] * xh + bp_[ci];
        }

    auto xn = x.node();
    auto gn = gamma.node();
    auto btn = beta.node();
    return Var<T>::make_result(
        std::move(out), {x, gamma, beta},
        [xn, gn, btn, xhat = std::move(xhat), invstd = std::move(invstd), training, n, c](Node<T>& node) {
            const T* g = node.grad.data();
            const T* gamma_v = gn->value.data();
            if (btn->requires_grad) {
                T* db = btn->ensure_grad().data();
                for (std::int64_t i = 0; i < n; ++i)
                    for (int ci = 0; ci < c; ++ci) db[ci] += g[i * c + ci];
            }
            if (gn->requires_grad) {
                T* dg = gn->ensure_grad().data();
                for (std::int64_t i = 0; i < n; ++i)
                    for (int ci = 0; ci < c; ++ci) dg[ci] += g[i * c + ci] * xhat[i * c + ci];
            }
            if (!xn->requires_grad) return;
            T* dx = xn->ensure_grad().data();
            if (!training) {
                for (std::int64_t i = 0; i < n; ++i)
                    for (int ci = 0; ci < c; ++ci)
                        dx[i * c + ci] += g[i * c + ci] * gamma_v[ci] * invstd[ci];
                return;
            }
            // backprop through the batch statistics
            Tensor<T> gsum({c}), gxsum({c});
            for (std::int64_t i = 0; i < n; ++i)
                for (int ci = 0; ci < c; ++ci) {
                    gsum[ci] += g[i * c + ci];
                    gxsum[ci] += g[i * c + ci] * xhat[i * c + ci];
                }
            for (int ci = 0; ci < c; ++ci) {
                gsum[ci] /= T(n);
                gxsum[ci] /= T(n);
            }
            for (std::int64_t i = 0; i < n; ++i)
                for (int ci = 0; ci < c; ++ci) {
                    const T xh = xhat[i * c + ci];
                    dx[i * c + ci] +=
                        gamma_v[ci] * invstd[ci] * (g[i * c + ci] - gsum[ci] - xh * gxsum[ci]);
                }
        });
}

// Rearranges H x W x (C*r^2) into rH x rW x C; pure element permutation.
template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
    const Tensor<T>& X = x.value();
    check(X.ndim() == 3, "pixel_shuffle: input must be H x W x C");
    check(r >= 1, "pixel_shuffle: bad factor");
    const int h = X.dim(0), w = X.dim(1), c = X.dim(2);
    check(c % (r * r) == 0, "pixel_shuffle: channels (" + std::to_string(c) +
                                ") not divisible by r^2 (" + std::to_string(r * r) + ")");
    const int co = c / (r * r);
    Tensor<T> out({h * r, w * r, co});
    for (int y = 0; y < h; ++y)
        for (int x_ = 0; x_ < w; ++x_)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx)
                    for (int ci = 0; ci < co; ++ci)
                        out.at3(y * r + dy, x_ * r + dx, ci) = X.at3(y, x_, ci * r * r + dy * r + dx);
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn, r, h, w, co](Node<T>& node) {
        if (!xn->requires_grad) return;
        Tensor<T>& dx = xn->ensure_grad();
        for (int y = 0; y < h; ++y)
            for (int x_ = 0; x_ < w; ++x_)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx_ = 0; dx_ < r; ++dx_)
                        for (int ci = 0; ci < co; ++ci)
                            dx.at3(y, x_, ci * r * r + dy * r + dx_) +=
                                node.grad.at3(y * r + dy, x_ * r + dx_, ci);
    });
}

// Channel concatenation of same-size images.
template <typename T>
Var<T> concat_c(const std::vector<Var<T>>& xs) {
    check(!xs.empty(), "concat_c: empty input list");
    const int h = xs[0].dim(0), w = xs[0].dim(1);
    int ctot = 0;
    for (const auto& v : xs) {
        check(v.value().ndim() == 3 && v.dim(0) == h && v.dim(1) == w,
              "concat_c: spatial dims mismatch");
        ctot += v.dim(2);
    }
    Tensor<T> out({h, w, ctot});
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    int coff = 0;
    for (const auto& v : xs) {
        const int ci = v.dim(2);
        const T* src = v.value().data();
        for (std::int64_t i = 0; i < n; ++i)
            std::memcpy(out.data() + i * ctot + coff, src + i * ci, sizeof(T) * ci);
        coff += ci;
    }
    std::vector<std::shared_ptr<Node<T>>> nodes;
    std::vector<int> chans;
    for (const auto& v : xs) {
        nodes.push_back(v.node());
        chans.push_back(v.dim(2));
    }
    return Var<T>::make_result(std::move(out), xs, [nodes, chans, n, ctot](Node<T>& node) {
        const T* g = node.grad.data();
        int coff = 0;
        for (std::size_t p = 0; p < nodes.size(); ++p) {
            const int ci = chans[p];
            if (nodes[p]->requires_grad) {
                T* dx = nodes[p]->ensure_grad().data();
                for (std::int64_t i = 0; i < n; ++i)
                    for (int cc = 0; cc < ci; ++cc) dx[i * ci + cc] += g[i * ctot + coff + cc];
            }
            coff += ci;
        }
    });
}

template <typename T>
Var<T> concat_c(const Var<T>& a, const Var<T>& b) {
    return concat_c(std::vector<Var<T>>{a, b});
}

// Channel slice [c0, c0+len).
template <typename T>
Var<T> slice_c(const Var<T>& x, int c0, int len) {
    const Tensor<T>& X = x.value();
    check(X.ndim() == 3, "slice_c: input must be H x W x C");
    const int h = X.dim(0), w = X.dim(1), c = X.dim(2);
    check(c0 >= 0 && len >= 1 && c0 + len <= c, "slice_c: range out of bounds");
    Tensor<T> out({h, w, len});
    const std::int64_t n = static_cast<std::int64_t>(h) * w;
    for (std::int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * len, X.data() + i * c + c0, sizeof(T) * len);
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn, c0, len, n, c](Node<T>& node) {
        if (!xn->requires_grad) return;
        T* dx = xn->ensure_grad().data();
        const T* g = node.grad.data();
        for (std::int64_t i = 0; i < n; ++i)
            for (int cc = 0; cc < len; ++cc) dx[i * c + c0 + cc] += g[i * len + cc];
    });
}

// Edge-replicate padding to an exact target size (grows only).
template <typename T>
Var<T> pad_edge(const Var<T>& x, int target_h, int target_w) {
    const Tensor<T>& X = x.value();
    check(X.ndim() == 3, "pad_edge: input must be H x W x C");
    const int h = X.dim(0), w = X.dim(1), c = X.dim(2);
    check(h >= 1 && w >= 1, "pad_edge: empty image");
    check(target_h >= h && target_w >= w, "pad_edge: target smaller than input");
    if (target_h == h && target_w == w) return x;
    Tensor<T> out({target_h, target_w, c});
    for (int y = 0; y < target_h; ++y) {
        const int ys = y < h ? y : h - 1;
        for (int x_ = 0; x_ < target_w; ++x_) {
            const int xs = x_ < w ? x_ : w - 1;
            for (int ci = 0; ci < c; ++ci) out.at3(y, x_, ci) = X.at3(ys, xs, ci);
        }
    }
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn, h, w, c, target_h, target_w](Node<T>& node) {
        if (!xn->requires_grad) return;
        Tensor<T>& dx = xn->ensure_grad();
        for (int y = 0; y < target_h; ++y) {
            const int ys = y < h ? y : h - 1;
            for (int x_ = 0; x_ < target_w; ++x_) {
                const int xs = x_ < w ? x_ : w - 1;
                for (int ci = 0; ci < c; ++ci) dx.at3(ys, xs, ci) += node.grad.at3(y, x_, ci);
            }
        }
    });
}

// Top-left crop to h x w.
template <typename T>
Var<T> crop_top_left(const Var<T>& x, int h, int w) {
    const Tensor<T>& X = x.value();
    check(X.ndim() == 3, "crop_top_left: input must be H x W x C");
    check(h >= 1 && w >= 1 && h <= X.dim(0) && w <= X.dim(1), "crop_top_left: bad crop size");
    if (h == X.dim(0) && w == X.dim(1)) return x;
    const int c = X.dim(2);
    Tensor<T> out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x_ = 0; x_ < w; ++x_)
            for (int ci = 0; ci < c; ++ci) out.at3(y, x_, ci) = X.at3(y, x_, ci);
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn, h, w, c](Node<T>& node) {
        if (!xn->requires_grad) return;
        Tensor<T>& dx = xn->ensure_grad();
        for (int y = 0; y < h; ++y)
            for (int x_ = 0; x_ < w; ++x_)
                for (int ci = 0; ci < c; ++ci) dx.at3(y, x_, ci) += node.grad.at3(y, x_, ci);
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check(a.value().same_dims(b.value()), "add: shape mismatch " + a.value().dims_str() +
                                              " vs " + b.value().dims_str());
    Tensor<T> out(a.value().dims());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
    auto an = a.node();
    auto bn = b.node();
    return Var<T>::make_result(std::move(out), {a, b}, [an, bn](Node<T>& node) {
        const T* g = node.grad.data();
        if (an->requires_grad) {
            T* da = an->ensure_grad().data();
            for (std::int64_t i = 0; i < node.grad.numel(); ++i) da[i] += g[i];
        }
        if (bn->requires_grad) {
            T* db = bn->ensure_grad().data();
            for (std::int64_t i = 0; i < node.grad.numel(); ++i) db[i] += g[i];
        }
    });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, T s) {
    Tensor<T> out(x.value().dims());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * s;
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn, s](Node<T>& node) {
        if (!xn->requires_grad) return;
        T* dx = xn->ensure_grad().data();
        const T* g = node.grad.data();
        for (std::int64_t i = 0; i < node.grad.numel(); ++i) dx[i] += s * g[i];
    });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
    T s = T(0);
    for (std::int64_t i = 0; i < x.numel(); ++i) s += x.value()[i];
    Tensor<T> out({1});
    out[0] = s;
    auto xn = x.node();
    return Var<T>::make_result(std::move(out), {x}, [xn](Node<T>& node) {
        if (!xn->requires_grad) return;
        T* dx = xn->ensure_grad().data();
        const T g = node.grad[0];
        for (std::int64_t i = 0; i < xn->value.numel(); ++i) dx[i] += g;
    });
}

// Mean over all elements of (a-b)^2.
template <typename T>
Var<T> mse_mean(const Var<T>& a, const Var<T>& b) {
    check(a.value().same_dims(b.value()), "mse_mean: shape mismatch");
    const std::int64_t n = a.numel();
    check(n > 0, "mse_mean: empty input");
    T s = T(0);
    for (std::int64_t i = 0; i < n; ++i) {
        const T d = a.value()[i] - b.value()[i];
        s += d * d;
    }
    Tensor<T> out({1});
    out[0] = s / T(n);
    auto an = a.node();
    auto bn = b.node();
    return Var<T>::make_result(std::move(out), {a, b}, [an, bn, n](Node<T>& node) {
        const T g = node.grad[0] * T(2) / T(n);
        const T* av = an->value.data();
        const T* bv = bn->value.data();
        if (an->requires_grad) {
            T* da = an->ensure_grad().data();
            for (std::int64_t i = 0; i < n; ++i) da[i] += g * (av[i] - bv[i]);
        }
        if (bn->requires_grad) {
            T* db = bn->ensure_grad().data();
            for (std::int64_t i = 0; i < n; ++i) db[i] -= g * (av[i] - bv[i]);
        }
    });
}

// Mean over all elements of |a-b|; subgradient 0 at ties.
template <typename T>
Var<T> mae_mean(const Var<T>& a, const Var<T>& b) {
    check(a.value().same_dims(b.value()), "mae_mean: shape mismatch");
    const std::int64_t n = a.numel();
    check(n > 0, "mae_mean: empty input");
    T s = T(0);
    for (std::int64_t i = 0; i < n; ++i) s += std::abs(a.value()[i] - b.value()[i]);
    Tensor<T> out({1});
    out[0] = s / T(n);
    auto an = a.node();
    auto bn = b.node();
    return Var<T>::make_result(std::move(out), {a, b}, [an, bn, n](Node<T>& node) {
        const T g = node.grad[0] / T(n);
        const T* av = an->value.data();
        const T* bv = bn->value.data();
        if (an->requires_grad) {
            T* da = an->ensure_grad().data();
            for (std::int64_t i = 0; i < n; ++i) {
                const T d = av[i] - bv[i];
                da[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
            }
        }
        if (bn->requires_grad) {
            T* db = bn->ensure_grad().data();
            for (std::int64_t i = 0; i < n; ++i) {
                const T d = av[i] - bv[i];
                db[i] -= d > T(0) ? g : (d < T(0) ? -g : T(0));
            }
        }
    });
}

}  // namespace vcqe
