#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "vcqe/nn.hpp"

namespace vcqe {

struct EnhancerConfig {
    int in_channels = 3;   // 3 for single-frame input, 6 for warped prior + decoded
    int out_channels = 3;
    int width = 64;        // hidden channels of every intermediate layer
};

inline std::array<std::pair<int, int>, 3> branch_shapes(int h, int w) {
    check(h % 4 == 0 && w % 4 == 0, "branch_shapes: dims must be divisible by 4");
    return {{{h, w}, {h / 2, w / 2}, {h / 4, w / 4}}};
}

// Quality enhancement network: three scale branches extracted by strided
// convolutions (stride 1/2/4 with kernels 7/5/3), four ResBlocks per branch,
// coarse-to-fine deconvolution fusion, and a zero-initialized reconstruction
// head added onto the decoded frame as a global residual.
template <typename T>
class EnhancerNet {
public:
    EnhancerNet() = default;

    EnhancerNet(const EnhancerConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int w = cfg.width;
        entry_full_ = Conv2d<T>(7, cfg.in_channels, w, 1, rng);
        entry_mid_ = Conv2d<T>(5, cfg.in_channels, w, 2, rng);
        entry_coarse_ = Conv2d<T>(3, cfg.in_channels, w, 4, rng);
        for (int i = 0; i < 4; ++i) {
            rb_full_[i] = ResBlock<T>(w, rng);
            rb_mid_[i] = ResBlock<T>(w, rng);
            rb_coarse_[i] = ResBlock<T>(w, rng);
        }
        up_coarse_ = ConvTranspose2d<T>(4, w, w, 2, rng);
        up_mid_ = ConvTranspose2d<T>(4, w, w, 2, rng);
        fuse_mid_ = Conv2d<T>(3, 2 * w, w, 1, rng);
        fuse_full_ = Conv2d<T>(3, 2 * w, w, 1, rng);
        head_ = Conv2d<T>(3, w, cfg.out_channels, 1, rng, /*zero_init=*/true);
    }

    const EnhancerConfig& config() const { return cfg_; }

    Var<T> forward(const Var<T>& x) const {
        check(x.value().ndim() == 3, "enhance: input must be H x W x C");
        const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
        check(h % 4 == 0 && wd % 4 == 0,
              "enhance: dims " + x.value().dims_str() + " not divisible by 4; pad first");
        check(cin == cfg_.in_channels, "enhance: expected " + std::to_string(cfg_.in_channels) +
                                           " input channels, got " + std::to_string(cin));
        // the decoded frame is the trailing slice of a concatenated input
        Var<T> base = cin == cfg_.out_channels
                          ? x
                          : slice_c(x, cin - cfg_.out_channels, cfg_.out_channels);

        Var<T> f1 = relu(entry_full_(x));
        Var<T> f2 = relu(entry_mid_(x));
        Var<T> f3 = relu(entry_coarse_(x));
        for (int i = 0; i < 4; ++i) {
            f1 = rb_full_[i](f1);
            f2 = rb_mid_[i](f2);
            f3 = rb_coarse_[i](f3);
        }
        Var<T> m = relu(fuse_mid_(concat_c(relu(up_coarse_(f3)), f2)));
        Var<T> f = relu(fuse_full_(concat_c(relu(up_mid_(m)), f1)));
        return add(base, head_(f));
    }

    std::vector<NamedParam<T>> named_parameters() {
        std::vector<NamedParam<T>> out;
        entry_full_.collect("entry_full", out);
        entry_mid_.collect("entry_mid", out);
        entry_coarse_.collect("entry_coarse", out);
        for (int i = 0; i < 4; ++i) {
            rb_full_[i].collect("full.rb" + std::to_string(i), out);
            rb_mid_[i].collect("mid.rb" + std::to_string(i), out);
            rb_coarse_[i].collect("coarse.rb" + std::to_string(i), out);
        }
        up_coarse_.collect("up_coarse", out);
        up_mid_.collect("up_mid", out);
        fuse_mid_.collect("fuse_mid", out);
        fuse_full_.collect("fuse_full", out);
        head_.collect("head", out);
        return out;
    }

    std::vector<NamedBuffer<T>> named_buffers() { return {}; }

    void set_trainable(bool trainable) {
        auto params = named_parameters();
        vcqe::set_trainable(params, trainable);
    }

private:
    EnhancerConfig cfg_;
    Conv2d<T> entry_full_, entry_mid_, entry_coarse_;
    std::array<ResBlock<T>, 4> rb_full_, rb_mid_, rb_coarse_;
    ConvTranspose2d<T> up_coarse_, up_mid_;
    Conv2d<T> fuse_mid_, fuse_full_, head_;
};

}  // namespace vcqe
