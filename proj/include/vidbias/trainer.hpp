#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vidbias/encoder.hpp"
#include "vidbias/losses.hpp"
#include "vidbias/synthvid.hpp"

namespace vidbias {

struct TrainConfig {
    double base_lr = 1e-4;  // per reference batch of 64 (linear scaling rule)
    int batch_size = 32;
    int epochs = 30;
    int warmup_epochs = 5;
    double weight_decay = 0.01;
    double beta1 = 0.9, beta2 = 0.999;
    LossWeights weights;
    uint64_t seed = 1;
    bool random_resized_crop = true;
    bool horizontal_flip = true;

    void validate() const {
        if (batch_size <= 0 || epochs <= 0) throw std::invalid_argument("TrainConfig: batch/epochs must be positive");
        if (warmup_epochs < 0 || warmup_epochs >= epochs)
            throw std::invalid_argument("TrainConfig: warmup_epochs must be < epochs");
    }
};

inline double effective_lr(const TrainConfig& cfg) {
    return cfg.base_lr * cfg.batch_size / 64.0;
}

// Linear ramp 0 -> eff over warmup steps, then cosine decay to 0 at
// total_steps. Step 0 is defined as 0.
double lr_at(int64_t step, int64_t warmup_steps, int64_t total_steps, double eff);

// Decoupled-weight-decay adaptive optimizer (bias-corrected moments).
class AdamW {
public:
    AdamW(double beta1, double beta2, double weight_decay, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

    void step(std::vector<ad::Var<float>>& params, const std::vector<Tensor<float>>& grads, double lr);

    int64_t t() const { return t_; }

private:
    double beta1_, beta2_, weight_decay_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor<float>> m_, v_;
};

struct AugmentFlags {
    bool random_resized_crop = true;
    bool horizontal_flip = true;
};

// Random resized crop (scale [0.6, 1.0], aspect [3/4, 4/3], one window shared
// by all frames and the mask) followed by horizontal flip with p = 0.5 that
// remaps direction-sensitive labels through flip_map.
void augment_inplace(VideoClip& clip, int& label, Rng& rng, const AugmentFlags& flags,
                     const std::vector<int>& flip_map);

struct LoadedClip {
    VideoClip clip;
    int label = 0;
    std::string id;
};

std::vector<LoadedClip> load_split_clips(const std::filesystem::path& data_root,
                                         const std::string& split, bool want_mask = false);

struct HistoryStep {
    int64_t step = 0;
    double ce = 0, adv = 0, ent = 0, gp = 0, total = 0, lr = 0;
};

struct ValPoint {
    int epoch = 0;
    double acc = 0;  // percent
};

struct FitResult {
    std::vector<HistoryStep> steps;
    std::vector<ValPoint> vals;
    int best_epoch = -1;
    double best_val_acc = 0;
};

struct TrainAbortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full training loop: shuffled batches, augmentation, static-clip objective,
// AdamW at lr_at(step), per-epoch validation on the val split (motion-clip
// accuracy), best-by-val checkpointing, step-level history. Aborts with the
// offending batch ids if the loss goes non-finite.
FitResult fit(const TrainConfig& cfg, Encoder<float>& enc,
              const std::filesystem::path& data_root, const std::filesystem::path& out_dir);

// Standard deviation (population) of validation accuracy over the last half
// of the curve; needs at least 5 points.
double stability_score(const std::vector<double>& val_acc);

void save_history(const std::filesystem::path& path, const FitResult& fit);
FitResult load_history(const std::filesystem::path& path);

// Inference helper shared by validation and evaluation.
int predict_class(const Encoder<float>& enc, const VideoClip& clip);

}  // namespace vidbias
