#pragma once

#include <string>
#include <vector>

#include "vcqe/frame.hpp"
#include "vcqe/nn.hpp"

namespace vcqe {

struct FlowNetConfig {
    int image_channels = 3;
    // Divides the FlowNetS channel ladder 64-128-256-512-512-1024. 1 is the
    // full ladder; 2 is the half-width desk-scale default; tests use 8.
    int width_divisor = 2;
};

// Six-scale encoder-decoder flow estimator. Each encoder stage is a strided
// convolution with batch norm and ReLU; the decoder refines a coarse flow
// five times by deconvolving features, upsampling the previous flow with a
// bilinear-initialized deconvolution (displacements doubled per level), and
// concatenating the same-scale encoder features. The last refinement
// predicts the full-resolution flow through a sub-pixel convolution and
// pixel shuffle instead of one more deconvolution.
template <typename T>
class FlowNet {
public:
    FlowNet() = default;

    FlowNet(const FlowNetConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int d = cfg.width_divisor;
        check(d >= 1 && 64 % d == 0 && 32 % d == 0, "FlowNet: bad width divisor");
        const int c1 = 64 / d, c2 = 128 / d, c3 = 256 / d, c4 = 512 / d, c5 = 512 / d,
                  c6 = 1024 / d;
        const int in = 2 * cfg.image_channels;

        conv1_ = Conv2d<T>(7, in, c1, 2, rng);
        bn1_ = BatchNorm2d<T>(c1);
        conv2_ = Conv2d<T>(5, c1, c2, 2, rng);
        bn2_ = BatchNorm2d<T>(c2);
        conv3_ = Conv2d<T>(5, c2, c3, 2, rng);
        bn3_ = BatchNorm2d<T>(c3);
        conv3_1_ = Conv2d<T>(3, c3, c3, 1, rng);
        bn3_1_ = BatchNorm2d<T>(c3);
        conv4_ = Conv2d<T>(3, c3, c4, 2, rng);
        bn4_ = BatchNorm2d<T>(c4);
        conv4_1_ = Conv2d<T>(3, c4, c4, 1, rng);
        bn4_1_ = BatchNorm2d<T>(c4);
        conv5_ = Conv2d<T>(3, c4, c5, 2, rng);
        bn5_ = BatchNorm2d<T>(c5);
        conv5_1_ = Conv2d<T>(3, c5, c5, 1, rng);
        bn5_1_ = BatchNorm2d<T>(c5);
        conv6_ = Conv2d<T>(3, c5, c6, 2, rng);
        bn6_ = BatchNorm2d<T>(c6);
        conv6_1_ = Conv2d<T>(3, c6, c6, 1, rng);
        bn6_1_ = BatchNorm2d<T>(c6);

        const int u5 = 512 / d, u4 = 256 / d, u3 = 128 / d, u2 = 64 / d, u1 = 32 / d;
        pf6_ = Conv2d<T>(3, c6, 2, 1, rng);
        deconv5_ = ConvTranspose2d<T>(4, c6, u5, 2, rng);
        dbn5_ = BatchNorm2d<T>(u5);
        pf5_ = Conv2d<T>(3, c5 + u5 + 2, 2, 1, rng);
        deconv4_ = ConvTranspose2d<T>(4, c5 + u5 + 2, u4, 2, rng);
        dbn4_ = BatchNorm2d<T>(u4);
        pf4_ = Conv2d<T>(3, c4 + u4 + 2, 2, 1, rng);
        deconv3_ = ConvTranspose2d<T>(4, c4 + u4 + 2, u3, 2, rng);
        dbn3_ = BatchNorm2d<T>(u3);
        pf3_ = Conv2d<T>(3, c3 + u3 + 2, 2, 1, rng);
        deconv2_ = ConvTranspose2d<T>(4, c3 + u3 + 2, u2, 2, rng);
        dbn2_ = BatchNorm2d<T>(u2);
        pf2_ = Conv2d<T>(3, c2 + u2 + 2, 2, 1, rng);
        deconv1_ = ConvTranspose2d<T>(4, c2 + u2 + 2, u1, 2, rng);
        dbn1_ = BatchNorm2d<T>(u1);
        subpix_ = Conv2d<T>(3, c1 + u1 + 2, 8, 1, rng);

        for (auto* up : {&up6_, &up5_, &up4_, &up3_, &up2_})
            *up = ConvTranspose2d<T>::bilinear_upsample2(2, T(2));
    }

    const FlowNetConfig& config() const { return cfg_; }
    int forward_count() const { return forward_count_; }

    // Dense flow from two equally sized frames; pads to a multiple of 64
    // internally and crops the result back.
    Var<T> estimate(const Var<T>& prev, const Var<T>& curr, bool training) {
        check(prev.value().same_dims(curr.value()), "estimate_flow: frame dims mismatch");
        check(prev.value().ndim() == 3 && prev.dim(2) == cfg_.image_channels,
              "estimate_flow: unexpected channel count");
        const int h = prev.dim(0), w = prev.dim(1);
        const int ph = (h + 63) / 64 * 64;
        const int pw = (w + 63) / 64 * 64;
        Var<T> x = concat_c(pad_edge(prev, ph, pw), pad_edge(curr, ph, pw));
        Var<T> flow = forward_padded(x, training);
        return crop_top_left(flow, h, w);
    }

    std::vector<NamedParam<T>> named_parameters() {
        std::vector<NamedParam<T>> out;
        conv1_.collect("conv1", out);
        bn1_.collect("bn1", out);
        conv2_.collect("conv2", out);
        bn2_.collect("bn2", out);
        conv3_.collect("conv3", out);
        bn3_.collect("bn3", out);
        conv3_1_.collect("conv3_1", out);
        bn3_1_.collect("bn3_1", out);
        conv4_.collect("conv4", out);
        bn4_.collect("bn4", out);
        conv4_1_.collect("conv4_1", out);
        bn4_1_.collect("bn4_1", out);
        conv5_.collect("conv5", out);
        bn5_.collect("bn5", out);
        conv5_1_.collect("conv5_1", out);
        bn5_1_.collect("bn5_1", out);
        conv6_.collect("conv6", out);
        bn6_.collect("bn6", out);
        conv6_1_.collect("conv6_1", out);
        bn6_1_.collect("bn6_1", out);
        pf6_.collect("pf6", out);
        pf5_.collect("pf5", out);
        pf4_.collect("pf4", out);
        pf3_.collect("pf3", out);
        pf2_.collect("pf2", out);
        deconv5_.collect("deconv5", out);
        dbn5_.collect("dbn5", out);
        deconv4_.collect("deconv4", out);
        dbn4_.collect("dbn4", out);
        deconv3_.collect("deconv3", out);
        dbn3_.collect("dbn3", out);
        deconv2_.collect("deconv2", out);
        dbn2_.collect("dbn2", out);
        deconv1_.collect("deconv1", out);
        dbn1_.collect("dbn1", out);
        up6_.collect("up6", out);
        up5_.collect("up5", out);
        up4_.collect("up4", out);
        up3_.collect("up3", out);
        up2_.collect("up2", out);
        subpix_.collect("subpix", out);
        return out;
    }

    std::vector<NamedBuffer<T>> named_buffers() {
        std::vector<NamedBuffer<T>> out;
        bn1_.collect_buffers("bn1", out);
        bn2_.collect_buffers("bn2", out);
        bn3_.collect_buffers("bn3", out);
        bn3_1_.collect_buffers("bn3_1", out);
        bn4_.collect_buffers("bn4", out);
        bn4_1_.collect_buffers("bn4_1", out);
        bn5_.collect_buffers("bn5", out);
        bn5_1_.collect_buffers("bn5_1", out);
        bn6_.collect_buffers("bn6", out);
        bn6_1_.collect_buffers("bn6_1", out);
        dbn5_.collect_buffers("dbn5", out);
        dbn4_.collect_buffers("dbn4", out);
        dbn3_.collect_buffers("dbn3", out);
        dbn2_.collect_buffers("dbn2", out);
        dbn1_.collect_buffers("dbn1", out);
        return out;
    }

    void set_trainable(bool trainable) {
        auto params = named_parameters();
        vcqe::set_trainable(params, trainable);
    }

private:
    Var<T> forward_padded(const Var<T>& x, bool training) {
        ++forward_count_;
        check(x.dim(0) % 64 == 0 && x.dim(1) % 64 == 0, "FlowNet: padded dims must be 64-multiples");
        Var<T> e1 = relu(bn1_(conv1_(x), training));
        Var<T> e2 = relu(bn2_(conv2_(e1), training));
        Var<T> e3 = relu(bn3_(conv3_(e2), training));
        e3 = relu(bn3_1_(conv3_1_(e3), training));
        Var<T> e4 = relu(bn4_(conv4_(e3), training));
        e4 = relu(bn4_1_(conv4_1_(e4), training));
        Var<T> e5 = relu(bn5_(conv5_(e4), training));
        e5 = relu(bn5_1_(conv5_1_(e5), training));
        Var<T> e6 = relu(bn6_(conv6_(e5), training));
        e6 = relu(bn6_1_(conv6_1_(e6), training));

        Var<T> flow6 = pf6_(e6);
        Var<T> cat5 = concat_c({e5, relu(dbn5_(deconv5_(e6), training)), up6_(flow6)});
        Var<T> flow5 = pf5_(cat5);
        Var<T> cat4 = concat_c({e4, relu(dbn4_(deconv4_(cat5), training)), up5_(flow5)});
        Var<T> flow4 = pf4_(cat4);
        Var<T> cat3 = concat_c({e3, relu(dbn3_(deconv3_(cat4), training)), up4_(flow4)});
        Var<T> flow3 = pf3_(cat3);
        Var<T> cat2 = concat_c({e2, relu(dbn2_(deconv2_(cat3), training)), up3_(flow3)});
        Var<T> flow2 = pf2_(cat2);
        Var<T> cat1 = concat_c({e1, relu(dbn1_(deconv1_(cat2), training)), up2_(flow2)});
        // final x2: sub-pixel flow prediction, displacements rescaled to the finer grid
        return mul_scalar(pixel_shuffle(subpix_(cat1), 2), T(2));
    }

    FlowNetConfig cfg_;
    int forward_count_ = 0;

    Conv2d<T> conv1_, conv2_, conv3_, conv3_1_, conv4_, conv4_1_, conv5_, conv5_1_, conv6_,
        conv6_1_;
    BatchNorm2d<T> bn1_, bn2_, bn3_, bn3_1_, bn4_, bn4_1_, bn5_, bn5_1_, bn6_, bn6_1_;
    Conv2d<T> pf6_, pf5_, pf4_, pf3_, pf2_;
    ConvTranspose2d<T> deconv5_, deconv4_, deconv3_, deconv2_, deconv1_;
    BatchNorm2d<T> dbn5_, dbn4_, dbn3_, dbn2_, dbn1_;
    ConvTranspose2d<T> up6_, up5_, up4_, up3_, up2_;
    Conv2d<T> subpix_;
};

// Doubles a flow field's resolution and displacement values; the layer is a
// learnable deconvolution initialized to exact 2x bilinear interpolation
// with a 2x value scale.
template <typename T>
ConvTranspose2d<T> make_flow_upsampler() {
    return ConvTranspose2d<T>::bilinear_upsample2(2, T(2));
}

template <typename T>
Var<T> upsample_flow(const ConvTranspose2d<T>& up, const Var<T>& flow) {
    check(flow.value().ndim() == 3 && flow.dim(2) == 2, "upsample_flow: flow must be H x W x 2");
    return up(flow);
}

// Frame-level wrapper used by the inference pipeline.
template <typename T>
FlowT<T> estimate_flow(FlowNet<T>& net, const FrameT<T>& prev, const FrameT<T>& curr,
                       bool training = false) {
    check(prev.pixels.same_dims(curr.pixels), "estimate_flow: frame dims mismatch");
    Var<T> flow = net.estimate(Var<T>(prev.pixels), Var<T>(curr.pixels), training);
    FlowT<T> out;
    out.vectors = flow.value();
    out.src_index = prev.index;
    out.dst_index = curr.index;
    return out;
}

}  // namespace vcqe
