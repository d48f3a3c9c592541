#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vcqe/checkpoint.hpp"
#include "vcqe/dataset.hpp"
#include "vcqe/pipeline.hpp"

namespace vcqe {

// --- losses --------------------------------------------------------------
//
// The enhancement loss is the per-pixel mean squared error averaged over the
// n P frames; the warping loss is the per-pixel mean absolute error summed
// over frames (no 1/n), preserving the asymmetry of the training objective.

struct LossBreakdown {
    double e = 0;
    double w = 0;
    double total = 0;  // e + w exactly
};

template <typename T>
double loss_e(const std::vector<FrameT<T>>& enhanced, const std::vector<FrameT<T>>& original) {
    check(enhanced.size() == original.size(), "loss_e: list length mismatch");
    check(!enhanced.empty(), "loss_e: empty lists");
    double acc = 0;
    for (std::size_t t = 0; t < enhanced.size(); ++t) {
        check(enhanced[t].pixels.same_dims(original[t].pixels), "loss_e: frame dims mismatch");
        double mse = 0;
        const auto& a = enhanced[t].pixels;
        const auto& b = original[t].pixels;
        for (std::int64_t i = 0; i < a.numel(); ++i) {
            const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            mse += d * d;
        }
        acc += mse / static_cast<double>(a.numel());
    }
    return acc / static_cast<double>(enhanced.size());
}

template <typename T>
double loss_w(const std::vector<FrameT<T>>& predicted, const std::vector<FrameT<T>>& decoded) {
    check(predicted.size() == decoded.size(), "loss_w: list length mismatch");
    check(!predicted.empty(), "loss_w: empty lists");
    double acc = 0;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        check(predicted[t].pixels.same_dims(decoded[t].pixels), "loss_w: frame dims mismatch");
        double mae = 0;
        const auto& a = predicted[t].pixels;
        const auto& b = decoded[t].pixels;
        for (std::int64_t i = 0; i < a.numel(); ++i)
            mae += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
        acc += mae / static_cast<double>(a.numel());
    }
    return acc;
}

// Graph-building counterparts used inside training steps.
template <typename T>
Var<T> loss_e_var(const std::vector<Var<T>>& enhanced, const std::vector<Var<T>>& original) {
    check(enhanced.size() == original.size() && !enhanced.empty(), "loss_e: list length mismatch");
    Var<T> acc;
    for (std::size_t t = 0; t < enhanced.size(); ++t) {
        Var<T> term = mse_mean(enhanced[t], original[t]);
        acc = t == 0 ? term : add(acc, term);
    }
    return mul_scalar(acc, T(1) / T(enhanced.size()));
}

template <typename T>
Var<T> loss_w_var(const std::vector<Var<T>>& predicted, const std::vector<Var<T>>& decoded) {
    check(predicted.size() == decoded.size() && !predicted.empty(), "loss_w: list length mismatch");
    Var<T> acc;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        Var<T> term = mae_mean(predicted[t], decoded[t]);
        acc = t == 0 ? term : add(acc, term);
    }
    return acc;
}

// --- optimizer -------------------------------------------------------------

template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<NamedParam<T>> params, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& p : params_) {
            m_.push_back(Tensor<T>(p.var.value().dims()));
            v_.push_back(Tensor<T>(p.var.value().dims()));
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.var.zero_grad();
    }

    void step(double lr) {
        ++t_;
        const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
        const T corr1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
        const T corr2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
        const T lr_t = static_cast<T>(lr);
        const T eps = static_cast<T>(eps_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& var = params_[i].var;
            if (!var.requires_grad()) continue;
            Tensor<T>& value = var.mutable_value();
            const Tensor<T>& g = var.grad();
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::int64_t k = 0; k < value.numel(); ++k) {
                const T gk = g.empty() ? T(0) : g[k];
                m[k] = b1 * m[k] + (T(1) - b1) * gk;
                v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
                const T mhat = m[k] / corr1;
                const T vhat = v[k] / corr2;
                value[k] -= lr_t * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    std::int64_t steps() const { return t_; }
    const std::vector<NamedParam<T>>& params() const { return params_; }

    void store(Checkpoint& ck, const std::string& prefix = "adam") const {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            ck.set_blob(prefix + ".m." + params_[i].name, m_[i]);
            ck.set_blob(prefix + ".v." + params_[i].name, v_[i]);
        }
        ck.meta[prefix + "_t"] = t_;
        ck.meta[prefix + "_beta1"] = beta1_;
        ck.meta[prefix + "_beta2"] = beta2_;
        ck.meta[prefix + "_eps"] = eps_;
    }

    void load(const Checkpoint& ck, const std::string& prefix = "adam") {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = ck.get_blob<T>(prefix + ".m." + params_[i].name);
            v_[i] = ck.get_blob<T>(prefix + ".v." + params_[i].name);
        }
        t_ = ck.meta.at(prefix + "_t").get<std::int64_t>();
        beta1_ = ck.meta.at(prefix + "_beta1").get<double>();
        beta2_ = ck.meta.at(prefix + "_beta2").get<double>();
        eps_ = ck.meta.at(prefix + "_eps").get<double>();
    }

private:
    std::vector<NamedParam<T>> params_;
    std::vector<Tensor<T>> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

// --- configuration ----------------------------------------------------------

struct TrainConfig {
    double lr0 = 1e-4;
    int lr_decay_every_epochs = 20;  // divide by the factor after each 20 epochs
    double lr_decay_factor = 10.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int sequences_per_step = 1;  // 4-frame sequences per optimization step
    int crop = 256;
    int epochs = 40;
    int enhancer_width = 64;
    int flow_width_divisor = 2;
    std::uint64_t seed = 1;
};

inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 / std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every_epochs);
}

enum class TrainStage { sf, mf };

inline const char* to_string(TrainStage s) { return s == TrainStage::sf ? "sf" : "mf"; }

template <typename T>
struct ModelsT {
    EnhancerNet<T> sf;
    EnhancerNet<T> mf;
    FlowNet<T> flow;
};

using Models = ModelsT<float>;

template <typename T>
ModelsT<T> make_models(int enhancer_width, int flow_width_divisor, Rng& rng) {
    ModelsT<T> m;
    m.sf = EnhancerNet<T>({3, 3, enhancer_width}, rng);
    m.mf = EnhancerNet<T>({6, 3, enhancer_width}, rng);
    m.flow = FlowNet<T>({3, flow_width_divisor}, rng);
    return m;
}

// Trainable parameters of a stage, with checkpoint-name prefixes. The SF net
// is frozen throughout the MF stage.
inline std::vector<NamedParam<float>> stage_parameters(Models& m, TrainStage stage) {
    std::vector<NamedParam<float>> out;
    auto take = [&out](const std::string& prefix, std::vector<NamedParam<float>> ps) {
        for (auto& p : ps) out.push_back({prefix + "." + p.name, p.var});
    };
    if (stage == TrainStage::sf) {
        take("sf", m.sf.named_parameters());
    } else {
        take("mf", m.mf.named_parameters());
        take("flow", m.flow.named_parameters());
    }
    return out;
}

inline void apply_stage_freeze(Models& m, TrainStage stage) {
    m.sf.set_trainable(stage == TrainStage::sf);
    m.mf.set_trainable(stage == TrainStage::mf);
    m.flow.set_trainable(stage == TrainStage::mf);
}

// --- training steps ---------------------------------------------------------

struct StepDiagnostics {
    std::vector<double> frame_mse;  // per P frame (MF) or per frame (SF)
    std::vector<double> frame_mae;
};

namespace detail {

struct SeqLosses {
    Var<float> le, lw;
};

// Unrolls the recurrence over one 4-frame sample. The I frame runs through
// the frozen single-frame net outside the graph; the recurrent state is
// detached at every step boundary so gradients use only the nearest frame.
inline SeqLosses mf_sequence_losses(Models& m, const TrainingSample& s, StepDiagnostics* diag) {
    check(s.decoded.size() == 4 && s.original.size() == 4,
          "train_step: sample must hold 4 decoded and 4 original frames");
    Tensor<float> state0;
    {
        NoGradGuard ng;
        state0 = m.sf.forward(Var<float>(s.decoded[0].pixels)).value();
    }
    Var<float> state(state0);

    std::vector<Var<float>> enhanced, originals, predicted, decodeds;
    for (int t = 1; t <= 3; ++t) {
        Var<float> prev_d(s.decoded[t - 1].pixels);
        Var<float> curr_d(s.decoded[t].pixels);
        MfStepOut<float> out = mf_step_forward(m.mf, m.flow, state, prev_d, curr_d, true);
        enhanced.push_back(out.enhanced);
        originals.emplace_back(s.original[t].pixels);
        predicted.push_back(out.predicted);
        decodeds.push_back(curr_d);
        if (diag) {
            diag->frame_mse.push_back(
                mse_mean(out.enhanced.detach(), Var<float>(s.original[t].pixels)).value()[0]);
            diag->frame_mae.push_back(
                mae_mean(out.predicted.detach(), curr_d).value()[0]);
        }
        state = out.enhanced.detach();
    }
    return {loss_e_var(enhanced, originals), loss_w_var(predicted, decodeds)};
}

inline Var<float> sf_sequence_loss(Models& m, const TrainingSample& s) {
    check(!s.decoded.empty() && s.decoded.size() == s.original.size(),
          "train_step: malformed sample");
    std::vector<Var<float>> enhanced, originals;
    for (std::size_t t = 0; t < s.decoded.size(); ++t) {
        enhanced.push_back(m.sf.forward(Var<float>(s.decoded[t].pixels)));
        originals.emplace_back(s.original[t].pixels);
    }
    return loss_e_var(enhanced, originals);
}

}  // namespace detail

// One optimization step over a batch of 4-frame sequences. Returns the loss
// breakdown averaged over the batch; throws on non-finite losses with the
// per-frame values in the message.
inline LossBreakdown train_step(Models& m, Adam<float>& adam, TrainStage stage,
                                const std::vector<TrainingSample>& batch, double lr,
                                StepDiagnostics* diag = nullptr) {
    check(!batch.empty(), "train_step: empty batch");
    adam.zero_grad();
    Var<float> le, lw;
    StepDiagnostics local;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (stage == TrainStage::mf) {
            auto seq = detail::mf_sequence_losses(m, batch[i], &local);
            le = i == 0 ? seq.le : add(le, seq.le);
            lw = i == 0 ? seq.lw : add(lw, seq.lw);
        } else {
            auto seq = detail::sf_sequence_loss(m, batch[i]);
            le = i == 0 ? seq : add(le, seq);
        }
    }
    const float inv = 1.0f / static_cast<float>(batch.size());
    le = mul_scalar(le, inv);
    Var<float> total = le;
    if (stage == TrainStage::mf) {
        lw = mul_scalar(lw, inv);
        total = add(le, lw);
    }

    LossBreakdown out;
    out.e = static_cast<double>(le.value()[0]);
    out.w = stage == TrainStage::mf ? static_cast<double>(lw.value()[0]) : 0.0;
    out.total = out.e + out.w;
    if (!std::isfinite(out.total)) {
        std::string dump = "train_step: non-finite loss; per-frame mse:";
        for (double v : local.frame_mse) dump += " " + std::to_string(v);
        dump += "; per-frame mae:";
        for (double v : local.frame_mae) dump += " " + std::to_string(v);
        throw std::runtime_error(dump);
    }
    backward(total);
    adam.step(lr);
    if (diag) *diag = std::move(local);
    return out;
}

// --- full training loop ------------------------------------------------------

struct TrainRun {
    TrainStage stage = TrainStage::mf;
    int qp = 32;
    std::string checkpoint_dir;
    std::string init_checkpoint;    // weights only (e.g. SF pre-training, QP-32 model)
    std::string resume_checkpoint;  // weights + optimizer + rng + epoch position
};

struct StepEvent {
    int epoch = 0;
    int step_in_epoch = 0;
    std::int64_t global_step = 0;
    double lr = 0;
    LossBreakdown loss;
    std::string clip_id;
};

using StepObserver = std::function<void(const StepEvent&)>;

struct TrainResult {
    std::string final_checkpoint;
    std::vector<LossBreakdown> step_losses;
    int epochs_run = 0;
};

template <typename Net>
bool net_in_checkpoint(const Checkpoint& ck, const std::string& prefix, Net& net) {
    auto params = net.named_parameters();
    return !params.empty() && ck.has_blob(prefix + "." + params[0].name);
}

inline void load_models(const Checkpoint& ck, Models& m) {
    if (net_in_checkpoint(ck, "sf", m.sf)) checkpoint_load_net(ck, "sf", m.sf);
    if (net_in_checkpoint(ck, "mf", m.mf)) checkpoint_load_net(ck, "mf", m.mf);
    if (net_in_checkpoint(ck, "flow", m.flow)) checkpoint_load_net(ck, "flow", m.flow);
}

inline void store_models(Checkpoint& ck, Models& m) {
    checkpoint_store_net(ck, "sf", m.sf);
    checkpoint_store_net(ck, "mf", m.mf);
    checkpoint_store_net(ck, "flow", m.flow);
}

// Rebuilds models with the widths recorded in a checkpoint and loads the
// stored weights.
inline Models models_from_checkpoint(const Checkpoint& ck) {
    const int width = ck.meta.value("enhancer_width", 64);
    const int divisor = ck.meta.value("flow_width_divisor", 2);
    Rng rng(0);
    Models m = make_models<float>(width, divisor, rng);
    load_models(ck, m);
    return m;
}

// Epoch-based training with per-epoch checkpoints carrying the full
// optimizer state and rng stream, so a resumed run continues bit-exactly.
inline TrainResult train(const DatasetIndex& index, const TrainConfig& cfg, const TrainRun& run,
                         const StepObserver& observer = {}) {
    check(!index.entries.empty(), "train: empty dataset index");
    check(cfg.crop % 4 == 0, "train: crop size must be a multiple of 4");
    namespace fs = std::filesystem;
    if (!run.checkpoint_dir.empty()) fs::create_directories(run.checkpoint_dir);

    Rng init_rng(cfg.seed);
    Models m = make_models<float>(cfg.enhancer_width, cfg.flow_width_divisor, init_rng);
    Rng rng(cfg.seed + 1);
    int start_epoch = 0;
    std::int64_t global_step = 0;

    if (!run.init_checkpoint.empty()) {
        load_models(Checkpoint::load(run.init_checkpoint), m);
    }
    apply_stage_freeze(m, run.stage);
    Adam<float> adam(stage_parameters(m, run.stage), cfg.beta1, cfg.beta2, cfg.adam_eps);

    if (!run.resume_checkpoint.empty()) {
        Checkpoint ck = Checkpoint::load(run.resume_checkpoint);
        check(ck.meta.value("stage", "") == to_string(run.stage),
              "train: resume checkpoint stage mismatch");
        check(ck.meta.value("qp", -1) == run.qp, "train: resume checkpoint qp mismatch");
        load_models(ck, m);
        adam.load(ck);
        rng = Rng::deserialize(ck.meta.at("rng").get<std::string>());
        start_epoch = ck.meta.value("epoch", 0);
        global_step = ck.meta.value("global_step", std::int64_t(0));
    }

    TrainResult result;
    const int batch = std::max(1, cfg.sequences_per_step);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::vector<std::size_t> order(index.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);

        int step_in_epoch = 0;
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(batch)) {
            std::vector<TrainingSample> samples;
            std::string ids;
            for (std::size_t b = pos; b < std::min(pos + batch, order.size()); ++b) {
                const auto& entry = index.entries[order[b]];
                samples.push_back(sample(entry, cfg.crop, rng));
                ids += (ids.empty() ? "" : ",") + entry.id;
            }
            LossBreakdown loss = train_step(m, adam, run.stage, samples, lr);
            result.step_losses.push_back(loss);
            ++global_step;
            if (observer) observer({epoch, step_in_epoch, global_step, lr, loss, ids});
            ++step_in_epoch;
        }

        if (!run.checkpoint_dir.empty()) {
            Checkpoint ck;
            ck.meta["stage"] = to_string(run.stage);
            ck.meta["qp"] = run.qp;
            ck.meta["epoch"] = epoch + 1;
            ck.meta["global_step"] = global_step;
            ck.meta["lr"] = lr;
            ck.meta["rng"] = rng.serialize();
            ck.meta["enhancer_width"] = cfg.enhancer_width;
            ck.meta["flow_width_divisor"] = cfg.flow_width_divisor;
            store_models(ck, m);
            adam.store(ck);
            const std::string path = run.checkpoint_dir + "/" + to_string(run.stage) + "_qp" +
                                     std::to_string(run.qp) + "_epoch" + std::to_string(epoch + 1) +
                                     ".ckpt";
            ck.save(path);
            result.final_checkpoint = path;
        }
        result.epochs_run = epoch + 1 - start_epoch;
    }
    return result;
}

}  // namespace vcqe
