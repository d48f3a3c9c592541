#pragma once

#include <cmath>
#include <string>

#include "vcqe/autodiff.hpp"
#include "vcqe/ops.hpp"
#include "vcqe/rng.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

// Backward bilinear warp: output(y, x) samples the image at
// (y - fy(y, x), x - fx(y, x)). Flow channel 0 is the horizontal
// displacement, channel 1 the vertical. Sampling coordinates are clamped to
// the image rectangle (edge replication); gradients flow to both the image
// and the flow, with zero flow-gradient where the coordinate was clamped.
template <typename T>
Var<T> warp(const Var<T>& image, const Var<T>& flow) {
    const Tensor<T>& I = image.value();
    const Tensor<T>& F = flow.value();
    check(I.ndim() == 3, "warp: image must be H x W x C");
    check(F.ndim() == 3 && F.dim(2) == 2, "warp: flow must be H x W x 2");
    const int h = I.dim(0), w = I.dim(1), c = I.dim(2);
    check(F.dim(0) == h && F.dim(1) == w,
          "warp: image " + I.dims_str() + " and flow " + F.dims_str() + " dims mismatch");

    Tensor<T> out({h, w, c});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const T sx_raw = T(x) - F.at3(y, x, 0);
            const T sy_raw = T(y) - F.at3(y, x, 1);
            T sx = sx_raw < T(0) ? T(0) : (sx_raw > T(w - 1) ? T(w - 1) : sx_raw);
            T sy = sy_raw < T(0) ? T(0) : (sy_raw > T(h - 1) ? T(h - 1) : sy_raw);
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
            const int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
            const T tx = sx - T(x0);
            const T ty = sy - T(y0);
            for (int ci = 0; ci < c; ++ci) {
                const T v00 = I.at3(y0, x0, ci), v01 = I.at3(y0, x1, ci);
                const T v10 = I.at3(y1, x0, ci), v11 = I.at3(y1, x1, ci);
                out.at3(y, x, ci) = (T(1) - ty) * ((T(1) - tx) * v00 + tx * v01) +
                                    ty * ((T(1) - tx) * v10 + tx * v11);
            }
        }
    }

    auto in = image.node();
    auto fn = flow.node();
    return Var<T>::make_result(std::move(out), {image, flow}, [in, fn, h, w, c](Node<T>& node) {
        const bool need_di = in->requires_grad;
        const bool need_df = fn->requires_grad;
        if (!need_di && !need_df) return;
        T* di = need_di ? in->ensure_grad().data() : nullptr;
        T* df = need_df ? fn->ensure_grad().data() : nullptr;
        const Tensor<T>& I = in->value;
        const Tensor<T>& F = fn->value;
        const T* g = node.grad.data();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const T sx_raw = T(x) - F.at3(y, x, 0);
                const T sy_raw = T(y) - F.at3(y, x, 1);
                const bool clamped_x = sx_raw < T(0) || sx_raw > T(w - 1);
                const bool clamped_y = sy_raw < T(0) || sy_raw > T(h - 1);
                T sx = sx_raw < T(0) ? T(0) : (sx_raw > T(w - 1) ? T(w - 1) : sx_raw);
                T sy = sy_raw < T(0) ? T(0) : (sy_raw > T(h - 1) ? T(h - 1) : sy_raw);
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
                const int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
                const T tx = sx - T(x0);
                const T ty = sy - T(y0);
                const std::int64_t gi = (static_cast<std::int64_t>(y) * w + x) * c;
                T dsx = T(0), dsy = T(0);
                for (int ci = 0; ci < c; ++ci) {
                    const T go = g[gi + ci];
                    if (go == T(0)) continue;
                    if (di) {
                        di[I.idx3(y0, x0, ci)] += go * (T(1) - ty) * (T(1) - tx);
                        di[I.idx3(y0, x1, ci)] += go * (T(1) - ty) * tx;
                        di[I.idx3(y1, x0, ci)] += go * ty * (T(1) - tx);
                        di[I.idx3(y1, x1, ci)] += go * ty * tx;
                    }
                    if (df) {
                        const T v00 = I.at3(y0, x0, ci), v01 = I.at3(y0, x1, ci);
                        const T v10 = I.at3(y1, x0, ci), v11 = I.at3(y1, x1, ci);
                        dsx += go * ((T(1) - ty) * (v01 - v00) + ty * (v11 - v10));
                        dsy += go * ((T(1) - tx) * (v10 - v00) + tx * (v11 - v01));
                    }
                }
                if (df) {
                    // d(sample)/d(flow) = -1 where the coordinate is inside the rectangle
                    if (!clamped_x) df[F.idx3(y, x, 0)] -= dsx;
                    if (!clamped_y) df[F.idx3(y, x, 1)] -= dsy;
                }
            }
        }
    });
}

// Plain-tensor warp for inference paths.
template <typename T>
Tensor<T> warp_tensor(const Tensor<T>& image, const Tensor<T>& flow) {
    NoGradGuard ng;
    return warp(Var<T>(image), Var<T>(flow)).value();
}

struct WarpGradCheckReport {
    bool pass = false;
    double max_rel = 0.0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    std::string worst_target;  // "frame" or "flow"
    std::int64_t worst_coord = -1;
};

// Self-check of the warp gradients against central finite differences on a
// small random instance whose sampling points are strictly interior and away
// from integer coordinates (bilinear sampling is only piecewise smooth).
inline WarpGradCheckReport warp_gradient_check(std::uint64_t seed, double tol = 1e-3) {
    Rng rng(seed);
    const int h = 8, w = 8, c = 2;
    Tensor<double> img({h, w, c});
    for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
    Tensor<double> flo({h, w, 2});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fx = rng.uniform(0.1, 0.4);
            const double fy = rng.uniform(0.1, 0.4);
            flo.at3(y, x, 0) = x >= 1 ? fx : -fx;
            flo.at3(y, x, 1) = y >= 1 ? fy : -fy;
        }

    Var<double> vi(img, true), vf(flo, true);
    auto scalar = [&] { return sum(warp(vi, vf)); };
    backward(scalar());

    WarpGradCheckReport rep;
    const double step = 1e-5;
    auto probe = [&](Var<double>& v, const char* label) {
        const Tensor<double>& g = v.grad();
        for (std::int64_t i = 0; i < v.numel(); ++i) {
            const double orig = v.mutable_value()[i];
            double fp, fm;
            {
                NoGradGuard ng;
                v.mutable_value()[i] = orig + step;
                fp = scalar().value()[0];
                v.mutable_value()[i] = orig - step;
                fm = scalar().value()[0];
            }
            v.mutable_value()[i] = orig;
            const double fd = (fp - fm) / (2 * step);
            const double an = g.empty() ? 0.0 : g[i];
            const double denom = std::max(std::abs(an), std::abs(fd));
            const double rel = denom > 1e-7 ? std::abs(an - fd) / denom : std::abs(an - fd);
            if (rel > rep.max_rel) {
                rep.max_rel = rel;
                rep.worst_analytic = an;
                rep.worst_fd = fd;
                rep.worst_target = label;
                rep.worst_coord = i;
            }
        }
    };
    probe(vi, "frame");
    probe(vf, "flow");
    rep.pass = rep.max_rel <= tol;
    return rep;
}

}  // namespace vcqe
