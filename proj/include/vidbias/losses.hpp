#pragma once

#include <span>
#include <string>
#include <vector>

#include "vidbias/clip.hpp"
#include "vidbias/encoder.hpp"
#include "vidbias/rng.hpp"

namespace vidbias {

enum class FrameStrategy { First, Middle, Last, Random };

FrameStrategy frame_strategy_from_string(const std::string& s);
std::string frame_strategy_to_string(FrameStrategy s);

struct LossWeights {
    double w_adv = 1.0;
    double w_ent = 4.0;
    double w_gp = 10.0;
    FrameStrategy frame_strategy = FrameStrategy::Middle;
};

struct LossBundle {
    double total = 0, ce = 0, adv = 0, ent = 0, gp = 0;
};

enum class GpMode { LogitSum, JacobianFrobenius };

inline constexpr double kLogEps = 1e-8;  // clamp inside logs on the closed simplex

// ---------------------------------------------------------------------------
// reference forms on probability vectors (double)
// ---------------------------------------------------------------------------

// -sum_c y_c ln(max(p_c, eps)); natural log.
double cross_entropy(std::span<const double> probs, std::span<const double> onehot);
double cross_entropy(std::span<const double> probs, int label);

// -cross_entropy(probs, label), exactly.
double adversarial_loss(std::span<const double> probs, int label);

// sum_c p_c ln(max(p_c, eps)); in [-ln N_C, 0], minimized at uniform.
double entropy_loss(std::span<const double> probs);

// ---------------------------------------------------------------------------
// static clips
// ---------------------------------------------------------------------------

// first -> 0, middle -> floor(T/2), last -> T-1, random -> fresh uniform draw.
int static_frame_index(int t_len, FrameStrategy strategy, Rng& rng);

// All frames equal clip.frames[static_frame_index(...)]; zero motion energy.
VideoClip make_static_clip(const VideoClip& clip, FrameStrategy strategy, Rng& rng);

// ---------------------------------------------------------------------------
// differentiable forms on logits
// ---------------------------------------------------------------------------

template <class S>
ad::Var<S> ce_from_logits(const ad::Var<S>& logits, int label) {
    using namespace ad;
    const int n = static_cast<int>(logits.value().numel());
    if (label < 0 || label >= n) throw std::invalid_argument("ce_from_logits: label out of range");
    Tensor<S> onehot({n});
    onehot[label] = S(1);
    return neg(dot(log_softmax(logits), Var<S>::constant(std::move(onehot))));
}

// sum_c p_c log p_c from logits (exact on the open simplex).
template <class S>
ad::Var<S> entropy_from_logits(const ad::Var<S>& logits) {
    using namespace ad;
    Var<S> logp = log_softmax(logits);
    return dot(exp_(logp), logp);
}

// l2 norm of the input gradient of the logit sum (default) or the Frobenius
// norm of the full logits Jacobian (reference mode). `xbar` must be the
// differentiable leaf the logits were computed from; the result participates
// in the objective and is differentiated through.
template <class S>
ad::Var<S> gradient_penalty_from_logits(const ad::Var<S>& logits_static, const ad::Var<S>& xbar,
                                        GpMode mode) {
    using namespace ad;
    if (!xbar.requires_grad())
        throw std::invalid_argument(
            "gradient_penalty: static clip is not a differentiable input (second-order path unsupported)");
    if (mode == GpMode::LogitSum) {
        Var<S> s = sum_to_scalar(logits_static);
        Var<S> gx = grad(s, {xbar})[0];
        return pow_safe(sum_to_scalar(mul(gx, gx)), 0.5);
    }
    const int n = static_cast<int>(logits_static.value().numel());
    Var<S> ss;
    for (int c = 0; c < n; ++c) {
        Tensor<S> onehot({n});
        onehot[c] = S(1);
        Var<S> logit_c = dot(logits_static, Var<S>::constant(std::move(onehot)));
        Var<S> gc = grad(logit_c, {xbar})[0];
        Var<S> term = sum_to_scalar(mul(gc, gc));
        ss = ss.defined() ? add(ss, term) : term;
    }
    return pow_safe(ss, 0.5);
}

template <class S>
ad::Var<S> gradient_penalty(const Encoder<S>& enc, const ad::Var<S>& xbar, GpMode mode) {
    return gradient_penalty_from_logits(enc.forward(xbar), xbar, mode);
}

// ---------------------------------------------------------------------------
// combined objective, per sample
// ---------------------------------------------------------------------------

template <class S>
struct SampleLoss {
    ad::Var<S> objective;  // graph used for the parameter update
    double ce = 0, adv = 0, ent = 0, gp = 0;
};

// Only the motion clip contributes to CE; the adversarial, entropy and
// gradient-penalty terms act on the static clip.
template <class S>
SampleLoss<S> combined_sample_loss(const Encoder<S>& enc, const Tensor<S>& motion_cthw,
                                   const Tensor<S>& static_cthw, int label,
                                   const LossWeights& w, GpMode mode = GpMode::LogitSum) {
    using namespace ad;
    SampleLoss<S> out;
    Var<S> ce = ce_from_logits(enc.forward(Var<S>::constant(motion_cthw)), label);
    out.ce = static_cast<double>(ce.value()[0]);
    Var<S> total = ce;

    if (w.w_adv != 0 || w.w_ent != 0 || w.w_gp != 0) {
        Var<S> xbar = w.w_gp != 0 ? Var<S>::leaf(static_cthw) : Var<S>::constant(static_cthw);
        Var<S> logits_s = enc.forward(xbar);
        if (w.w_adv != 0) {
            Var<S> adv = neg(ce_from_logits(logits_s, label));
            out.adv = static_cast<double>(adv.value()[0]);
            total = add(total, scale(adv, static_cast<S>(w.w_adv)));
        }
        if (w.w_ent != 0) {
            Var<S> ent = entropy_from_logits(logits_s);
            out.ent = static_cast<double>(ent.value()[0]);
            total = add(total, scale(ent, static_cast<S>(w.w_ent)));
        }
        if (w.w_gp != 0) {
            Var<S> gp = gradient_penalty_from_logits(logits_s, xbar, mode);
            out.gp = static_cast<double>(gp.value()[0]);
            total = add(total, scale(gp, static_cast<S>(w.w_gp)));
        }
    }
    out.objective = total;
    return out;
}

// Bundle arithmetic: total is defined as ce + w_adv*adv + w_ent*ent + w_gp*gp
// over batch-mean components.
LossBundle bundle_from_means(double ce, double adv, double ent, double gp, const LossWeights& w);

// Spec-level convenience: builds the static clip internally and reports the
// bundle for a single clip (batch of one).
LossBundle combined_loss(const Encoder<float>& enc, const VideoClip& clip, int label,
                         const LossWeights& w, Rng& rng);

}  // namespace vidbias
