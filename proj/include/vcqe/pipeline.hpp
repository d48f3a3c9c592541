#pragma once

#include <vector>

#include "vcqe/enhancer.hpp"
#include "vcqe/flow_net.hpp"
#include "vcqe/frame.hpp"
#include "vcqe/warp.hpp"

namespace vcqe {

// One recurrence step used by both training (graph recorded) and inference
// (inside NoGradGuard): flow between consecutive decoded frames, warp of the
// previously enhanced frame, enhancement of the concatenated pair. The caller
// controls whether prev_enhanced is detached.
template <typename T>
struct MfStepOut {
    Var<T> flow;       // H x W x 2
    Var<T> predicted;  // warped previous enhanced frame
    Var<T> enhanced;
};

template <typename T>
MfStepOut<T> mf_step_forward(EnhancerNet<T>& mf, FlowNet<T>& flow_net, const Var<T>& prev_enhanced,
                             const Var<T>& prev_decoded, const Var<T>& curr_decoded,
                             bool training) {
    MfStepOut<T> out;
    out.flow = flow_net.estimate(prev_decoded, curr_decoded, training);
    out.predicted = warp(prev_enhanced, out.flow);
    out.enhanced = mf.forward(concat_c(out.predicted, curr_decoded));
    return out;
}

// Streaming state: the decoded and enhanced frames at time t.
template <typename T>
struct RecurrentStateT {
    FrameT<T> prev_decoded;
    FrameT<T> prev_enhanced;
    int t = 0;
};

using RecurrentState = RecurrentStateT<float>;

template <typename T>
FrameT<T> enhance_frame_sf(EnhancerNet<T>& sf, const FrameT<T>& decoded) {
    NoGradGuard ng;
    PaddedFrameT<T> padded = pad_to_multiple(decoded, 4);
    Var<T> out = sf.forward(Var<T>(padded.frame.pixels));
    FrameT<T> enhanced;
    enhanced.pixels = clamp01(crop_tensor(out.value(), padded.orig_h, padded.orig_w));
    enhanced.index = decoded.index;
    enhanced.kind = decoded.kind;
    enhanced.variant = FrameVariant::enhanced;
    return enhanced;
}

template <typename T>
RecurrentStateT<T> make_initial_state(EnhancerNet<T>& sf, const FrameT<T>& decoded0,
                                      FrameT<T>* enhanced_out = nullptr) {
    check(decoded0.kind == FrameKind::I, "enhance: first frame of a clip must be an I frame");
    FrameT<T> enhanced = enhance_frame_sf(sf, decoded0);
    if (enhanced_out) *enhanced_out = enhanced;
    return RecurrentStateT<T>{decoded0, std::move(enhanced), decoded0.index};
}

// Advances the recurrence by one P frame; produces the same result as the
// corresponding slice of enhance_clip.
template <typename T>
std::pair<FrameT<T>, RecurrentStateT<T>> step(EnhancerNet<T>& mf, FlowNet<T>& flow_net,
                                              const RecurrentStateT<T>& state,
                                              const FrameT<T>& decoded_t) {
    check(state.t == decoded_t.index - 1,
          "step: index discontinuity, state is at t=" + std::to_string(state.t) +
              " but frame has index " + std::to_string(decoded_t.index));
    check(decoded_t.pixels.same_dims(state.prev_decoded.pixels),
          "step: frame dimensions drifted within the clip");

    NoGradGuard ng;
    const int h = decoded_t.height(), w = decoded_t.width();
    Var<T> prev_e(pad_tensor_to_multiple(state.prev_enhanced.pixels, 4));
    Var<T> prev_d(pad_tensor_to_multiple(state.prev_decoded.pixels, 4));
    Var<T> curr_d(pad_tensor_to_multiple(decoded_t.pixels, 4));
    MfStepOut<T> out = mf_step_forward(mf, flow_net, prev_e, prev_d, curr_d, /*training=*/false);

    FrameT<T> enhanced;
    enhanced.pixels = clamp01(crop_tensor(out.enhanced.value(), h, w));
    enhanced.index = decoded_t.index;
    enhanced.kind = decoded_t.kind;
    enhanced.variant = FrameVariant::enhanced;
    RecurrentStateT<T> next{decoded_t, enhanced, decoded_t.index};
    return {std::move(enhanced), std::move(next)};
}

// Full-clip enhancement: I frame through the single-frame net, every P frame
// through flow -> warp -> concatenate -> enhance, with the enhanced frame
// carried forward. With single_frame=true every frame goes through the
// single-frame net instead (no temporal prior).
template <typename T>
std::vector<FrameT<T>> enhance_clip(const std::vector<FrameT<T>>& decoded, EnhancerNet<T>& sf,
                                    EnhancerNet<T>& mf, FlowNet<T>& flow_net,
                                    bool single_frame = false) {
    check(!decoded.empty(), "enhance_clip: empty clip");
    check(decoded[0].kind == FrameKind::I, "enhance_clip: first frame of a clip must be an I frame");
    for (const auto& f : decoded)
        check(f.pixels.same_dims(decoded[0].pixels), "enhance_clip: frame dimensions drifted");

    std::vector<FrameT<T>> out;
    out.reserve(decoded.size());
    if (single_frame) {
        for (const auto& f : decoded) out.push_back(enhance_frame_sf(sf, f));
        return out;
    }
    FrameT<T> first;
    RecurrentStateT<T> state = make_initial_state(sf, decoded[0], &first);
    out.push_back(std::move(first));
    for (std::size_t t = 1; t < decoded.size(); ++t) {
        auto [enhanced, next] = step(mf, flow_net, state, decoded[t]);
        out.push_back(std::move(enhanced));
        state = std::move(next);
    }
    return out;
}

}  // namespace vcqe
