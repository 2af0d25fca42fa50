#include "vidbias/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vidbias {

FrameStrategy frame_strategy_from_string(const std::string& s) {
    if (s == "first") return FrameStrategy::First;
    if (s == "middle") return FrameStrategy::Middle;
    if (s == "last") return FrameStrategy::Last;
    if (s == "random") return FrameStrategy::Random;
    throw std::invalid_argument("unknown frame strategy: " + s);
}

std::string frame_strategy_to_string(FrameStrategy s) {
    switch (s) {
        case FrameStrategy::First: return "first";
        case FrameStrategy::Middle: return "middle";
        case FrameStrategy::Last: return "last";
        case FrameStrategy::Random: return "random";
    }
    return "middle";
}

double cross_entropy(std::span<const double> probs, std::span<const double> onehot) {
    if (probs.size() != onehot.size())
        throw std::invalid_argument("cross_entropy: size mismatch");
    double acc = 0;
    for (size_t i = 0; i < probs.size(); ++i)
        if (onehot[i] != 0) acc -= onehot[i] * std::log(std::max(probs[i], kLogEps));
    return acc;
}

double cross_entropy(std::span<const double> probs, int label) {
    if (label < 0 || static_cast<size_t>(label) >= probs.size())
        throw std::invalid_argument("cross_entropy: label out of range");
    return -std::log(std::max(probs[static_cast<size_t>(label)], kLogEps));
}

double adversarial_loss(std::span<const double> probs, int label) {
    return -cross_entropy(probs, label);
}

double entropy_loss(std::span<const double> probs) {
    double acc = 0;
    for (const double p : probs) acc += p * std::log(std::max(p, kLogEps));
    return acc;
}

int static_frame_index(int t_len, FrameStrategy strategy, Rng& rng) {
    if (t_len < 1) throw std::invalid_argument("static_frame_index: empty clip");
    switch (strategy) {
        case FrameStrategy::First: return 0;
        case FrameStrategy::Middle: return t_len / 2;
        case FrameStrategy::Last: return t_len - 1;
        case FrameStrategy::Random: return rng.uniform_int(t_len);
    }
    return t_len / 2;
}

VideoClip make_static_clip(const VideoClip& clip, FrameStrategy strategy, Rng& rng) {
    const int tbar = static_frame_index(clip.t, strategy, rng);
    VideoClip out(clip.t, clip.h, clip.w, clip.c, clip.label);
    const size_t frame_sz = static_cast<size_t>(clip.h) * clip.w * clip.c;
    const float* src = clip.frames.data() + tbar * frame_sz;
    for (int t = 0; t < out.t; ++t)
        std::memcpy(out.frames.data() + t * frame_sz, src, frame_sz * sizeof(float));
    if (clip.has_mask()) {
        out.alloc_mask();
        const size_t mask_sz = static_cast<size_t>(clip.h) * clip.w;
        const float* msrc = clip.mask.data() + tbar * mask_sz;
        for (int t = 0; t < out.t; ++t)
            std::memcpy(out.mask.data() + t * mask_sz, msrc, mask_sz * sizeof(float));
    }
    return out;
}

LossBundle bundle_from_means(double ce, double adv, double ent, double gp, const LossWeights& w) {
    LossBundle b;
    b.ce = ce;
    b.adv = adv;
    b.ent = ent;
    b.gp = gp;
    b.total = ce + w.w_adv * adv + w.w_ent * ent + w.w_gp * gp;
    return b;
}

LossBundle combined_loss(const Encoder<float>& enc, const VideoClip& clip, int label,
                         const LossWeights& w, Rng& rng) {
    const VideoClip stat = make_static_clip(clip, w.frame_strategy, rng);
    const auto sample = combined_sample_loss<float>(enc, clip_to_chw<float>(clip),
                                                    clip_to_chw<float>(stat), label, w);
    return bundle_from_means(sample.ce, sample.adv, sample.ent, sample.gp, w);
}

}  // namespace vidbias
