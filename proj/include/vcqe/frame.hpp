#pragma once

#include <string>
#include <vector>

#include "vcqe/tensor.hpp"

namespace vcqe {

enum class FrameKind { I, P };
enum class FrameVariant { original, decoded, enhanced, predicted };

inline const char* to_string(FrameKind k) { return k == FrameKind::I ? "I" : "P"; }
inline const char* to_string(FrameVariant v) {
    switch (v) {
        case FrameVariant::original: return "original";
        case FrameVariant::decoded: return "decoded";
        case FrameVariant::enhanced: return "enhanced";
        case FrameVariant::predicted: return "predicted";
    }
    return "?";
}

// One image plane-set: H x W x C pixels in [0,1], time index, I/P kind.
template <typename T>
struct FrameT {
    Tensor<T> pixels;
    int index = 0;
    FrameKind kind = FrameKind::I;
    FrameVariant variant = FrameVariant::original;

    int height() const { return pixels.dim(0); }
    int width() const { return pixels.dim(1); }
    int channels() const { return pixels.dim(2); }
};

using Frame = FrameT<float>;

// Dense per-pixel displacement field between consecutive frames, in pixels.
// Channel 0 is horizontal, channel 1 vertical.
template <typename T>
struct FlowT {
    Tensor<T> vectors;  // H x W x 2
    int src_index = 0;
    int dst_index = 0;
};

using Flow = FlowT<float>;

// Ordered frame sequence with paired original/decoded variants (IPPP GOP).
template <typename T>
struct ClipT {
    std::string id;
    int qp = 0;
    std::vector<FrameT<T>> original;
    std::vector<FrameT<T>> decoded;
};

using Clip = ClipT<float>;

template <typename T>
void validate_clip(const ClipT<T>& clip) {
    check(clip.original.size() == clip.decoded.size(),
          "clip " + clip.id + ": original/decoded lengths differ");
    for (std::size_t t = 0; t < clip.original.size(); ++t) {
        const auto& o = clip.original[t];
        const auto& d = clip.decoded[t];
        check(o.pixels.same_dims(d.pixels), "clip " + clip.id + ": frame " + std::to_string(t) +
                                                " original/decoded dims differ");
        const FrameKind want = t == 0 ? FrameKind::I : FrameKind::P;
        check(d.kind == want, "clip " + clip.id + ": frame " + std::to_string(t) +
                                  " violates IPPP structure");
    }
}

// Edge-replicate padding up to the next multiple of m, with the original
// size kept so the padding can be undone exactly.
template <typename T>
struct PaddedFrameT {
    FrameT<T> frame;
    int orig_h = 0;
    int orig_w = 0;
};

using PaddedFrame = PaddedFrameT<float>;

template <typename T>
Tensor<T> pad_tensor_to_multiple(const Tensor<T>& t, int m) {
    check(m >= 1, "pad_to_multiple: m must be >= 1");
    check(t.ndim() == 3, "pad_to_multiple: tensor must be H x W x C");
    const int h = t.dim(0), w = t.dim(1), c = t.dim(2);
    check(h >= 1 && w >= 1, "pad_to_multiple: empty image");
    const int ph = (h + m - 1) / m * m;
    const int pw = (w + m - 1) / m * m;
    if (ph == h && pw == w) return t;
    Tensor<T> out({ph, pw, c});
    for (int y = 0; y < ph; ++y) {
        const int ys = y < h ? y : h - 1;
        for (int x = 0; x < pw; ++x) {
            const int xs = x < w ? x : w - 1;
            for (int ci = 0; ci < c; ++ci) out.at3(y, x, ci) = t.at3(ys, xs, ci);
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_tensor(const Tensor<T>& t, int h, int w) {
    check(t.ndim() == 3 && h >= 1 && w >= 1 && h <= t.dim(0) && w <= t.dim(1),
          "crop_tensor: bad crop size");
    if (h == t.dim(0) && w == t.dim(1)) return t;
    const int c = t.dim(2);
    Tensor<T> out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ci = 0; ci < c; ++ci) out.at3(y, x, ci) = t.at3(y, x, ci);
    return out;
}

template <typename T>
PaddedFrameT<T> pad_to_multiple(const FrameT<T>& frame, int m) {
    PaddedFrameT<T> out;
    out.orig_h = frame.height();
    out.orig_w = frame.width();
    out.frame = frame;
    out.frame.pixels = pad_tensor_to_multiple(frame.pixels, m);
    return out;
}

template <typename T>
FrameT<T> crop_back(const PaddedFrameT<T>& padded) {
    FrameT<T> out = padded.frame;
    out.pixels = crop_tensor(padded.frame.pixels, padded.orig_h, padded.orig_w);
    return out;
}

// Min/max clamp of every pixel into [0,1]; idempotent. Non-finite input is an
// error rather than silently absorbed.
template <typename T>
FrameT<T> clamp_pixels(const FrameT<T>& frame) {
    check(frame.pixels.all_finite(), "clamp_pixels: non-finite pixel values");
    FrameT<T> out = frame;
    for (std::int64_t i = 0; i < out.pixels.numel(); ++i) {
        T v = out.pixels[i];
        out.pixels[i] = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
    }
    return out;
}

template <typename T>
Tensor<T> clamp01(const Tensor<T>& t) {
    Tensor<T> out = t;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        T v = out[i];
        out[i] = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
    }
    return out;
}

}  // namespace vcqe
