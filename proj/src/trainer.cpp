#include "vidbias/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vidbias {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double lr_at(int64_t step, int64_t warmup_steps, int64_t total_steps, double eff) {
    if (step < 0) throw std::invalid_argument("lr_at: negative step");
    if (warmup_steps > 0 && step <= warmup_steps)
        return eff * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (step >= total_steps) return 0.0;
    const double progress = static_cast<double>(step - warmup_steps) /
                            static_cast<double>(total_steps - warmup_steps);
    return eff * 0.5 * (1.0 + std::cos(kPi * progress));
}

void AdamW::step(std::vector<ad::Var<float>>& params, const std::vector<Tensor<float>>& grads,
                 double lr) {
    if (grads.size() != params.size()) throw std::invalid_argument("AdamW::step: grad count mismatch");
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.shape());
            v_.emplace_back(p.shape());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].mutable_value();
        const auto& g = grads[i];
        if (!same_shape(g.shape, p.shape)) throw std::invalid_argument("AdamW::step: grad shape mismatch");
        auto& m = m_[i];
        auto& v = v_[i];
        for (int64_t k = 0; k < p.numel(); ++k) {
            const double gk = g[k];
            const double mk = beta1_ * m[k] + (1 - beta1_) * gk;
            const double vk = beta2_ * v[k] + (1 - beta2_) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            const double upd = mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * p[k];
            p[k] = static_cast<float>(p[k] - lr * upd);
        }
    }
}

namespace {

// bilinear sample of one frame channel with clamped edges
float sample_bilinear(const VideoClip& clip, int t, double y, double x, int ch) {
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, clip.h - 1);
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, clip.w - 1);
    const int y1 = std::min(y0 + 1, clip.h - 1);
    const int x1 = std::min(x0 + 1, clip.w - 1);
    const double ty = std::clamp(y - y0, 0.0, 1.0);
    const double tx = std::clamp(x - x0, 0.0, 1.0);
    const double v00 = clip.at(t, y0, x0, ch), v10 = clip.at(t, y0, x1, ch);
    const double v01 = clip.at(t, y1, x0, ch), v11 = clip.at(t, y1, x1, ch);
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return static_cast<float>(a + (b - a) * ty);
}

}  // namespace

void augment_inplace(VideoClip& clip, int& label, Rng& rng, const AugmentFlags& flags,
                     const std::vector<int>& flip_map) {
    if (flags.random_resized_crop) {
        const double area = rng.uniform(0.6, 1.0);
        const double aspect = rng.uniform(0.75, 4.0 / 3.0);  // w / h
        int ch = static_cast<int>(std::lround(std::sqrt(area * clip.h * clip.w / aspect)));
        int cw = static_cast<int>(std::lround(std::sqrt(area * clip.h * clip.w * aspect)));
        ch = std::clamp(ch, 4, clip.h);
        cw = std::clamp(cw, 4, clip.w);
        const int y0 = rng.uniform_int(clip.h - ch + 1);
        const int x0 = rng.uniform_int(clip.w - cw + 1);

        VideoClip out(clip.t, clip.h, clip.w, clip.c, clip.label);
        const bool with_mask = clip.has_mask();
        if (with_mask) out.alloc_mask();
        for (int t = 0; t < clip.t; ++t)
            for (int yy = 0; yy < clip.h; ++yy) {
                const double sy = y0 + (yy + 0.5) * ch / clip.h - 0.5;
                for (int xx = 0; xx < clip.w; ++xx) {
                    const double sx = x0 + (xx + 0.5) * cw / clip.w - 0.5;
                    for (int c = 0; c < clip.c; ++c)
                        out.at(t, yy, xx, c) = sample_bilinear(clip, t, sy, sx, c);
                    if (with_mask) {
                        const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, clip.h - 1);
                        const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, clip.w - 1);
                        out.mask_at(t, yy, xx) = clip.mask_at(t, ny, nx);
                    }
                }
            }
        clip = std::move(out);
    }
    if (flags.horizontal_flip && rng.bernoulli(0.5)) {
        for (int t = 0; t < clip.t; ++t)
            for (int y = 0; y < clip.h; ++y)
                for (int x = 0; x < clip.w / 2; ++x) {
                    const int mx = clip.w - 1 - x;
                    for (int c = 0; c < clip.c; ++c)
                        std::swap(clip.at(t, y, x, c), clip.at(t, y, mx, c));
                    if (clip.has_mask()) std::swap(clip.mask_at(t, y, x), clip.mask_at(t, y, mx));
                }
        if (label < 0 || static_cast<size_t>(label) >= flip_map.size())
            throw std::invalid_argument("augment: label outside flip map");
        label = flip_map[static_cast<size_t>(label)];
        clip.label = label;
    }
}

std::vector<LoadedClip> load_split_clips(const std::filesystem::path& data_root,
                                         const std::string& split, bool want_mask) {
    const auto rows = load_manifest(data_root / split / "manifest.jsonl");
    std::vector<LoadedClip> out(rows.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(rows.size()); ++i) {
        const auto& row = rows[static_cast<size_t>(i)];
        LoadedClip lc;
        lc.clip = load_clip(data_root / row.path, want_mask);
        lc.label = row.label;
        lc.id = row.id;
        out[static_cast<size_t>(i)] = std::move(lc);
    }
    return out;
}

int predict_class(const Encoder<float>& enc, const VideoClip& clip) {
    const auto logits = enc.forward(ad::Var<float>::constant(clip_to_chw<float>(clip))).value();
    const auto ld = logits_to_double(logits);
    return argmax_lowest_tiebreak(ld);
}

namespace {

double validation_accuracy(const Encoder<float>& enc, const std::vector<LoadedClip>& val) {
    int64_t correct = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) reduction(+ : correct)
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(val.size()); ++i) {
        const auto& lc = val[static_cast<size_t>(i)];
        if (predict_class(enc, lc.clip) == lc.label) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(val.size());
}

}  // namespace

FitResult fit(const TrainConfig& cfg, Encoder<float>& enc,
              const std::filesystem::path& data_root, const std::filesystem::path& out_dir) {
    cfg.validate();
    const DatasetMeta meta = load_dataset_meta(data_root);
    const auto train_set = load_split_clips(data_root, "train");
    const auto val_set = load_split_clips(data_root, "val");
    if (train_set.empty() || val_set.empty())
        throw std::runtime_error("fit: empty train or val split under " + data_root.string());
    std::filesystem::create_directories(out_dir);

    const int n = static_cast<int>(train_set.size());
    const int spe = (n + cfg.batch_size - 1) / cfg.batch_size;  // steps per epoch
    const int64_t total_steps = static_cast<int64_t>(spe) * cfg.epochs;
    const int64_t warmup_steps = static_cast<int64_t>(spe) * cfg.warmup_epochs;
    const double eff = effective_lr(cfg);
    const AugmentFlags aug{cfg.random_resized_crop, cfg.horizontal_flip};

    Rng root_rng(cfg.seed);
    AdamW opt(cfg.beta1, cfg.beta2, cfg.weight_decay);
    auto& params = enc.params();
    const size_t n_params = params.size();

    FitResult result;
    int64_t gstep = 0;

    struct SlotOut {
        std::vector<Tensor<float>> grads;
        double ce = 0, adv = 0, ent = 0, gp = 0;
        bool finite = true;
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // deterministic shuffle, independent of thread count
        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        Rng shuffle_rng = root_rng.child("shuffle", static_cast<uint64_t>(epoch));
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);

        for (int step = 0; step < spe; ++step) {
            const int lo = step * cfg.batch_size;
            const int hi = std::min(n, lo + cfg.batch_size);
            const int bsz = hi - lo;
            const double lr = lr_at(gstep, warmup_steps, total_steps, eff);

            std::vector<SlotOut> slots(static_cast<size_t>(bsz));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
            for (int s = 0; s < bsz; ++s) {
                const auto& item = train_set[static_cast<size_t>(order[static_cast<size_t>(lo + s)])];
                const uint64_t slot_key = (static_cast<uint64_t>(epoch) * 1000003ULL +
                                           static_cast<uint64_t>(step)) * 1024ULL +
                                          static_cast<uint64_t>(s);
                VideoClip clip = item.clip;
                int label = item.label;
                Rng aug_rng = root_rng.child("aug", slot_key);
                augment_inplace(clip, label, aug_rng, aug, meta.flip_map);
                Rng tbar_rng = root_rng.child("tbar", slot_key);
                const VideoClip stat = make_static_clip(clip, cfg.weights.frame_strategy, tbar_rng);

                auto sample = combined_sample_loss<float>(enc, clip_to_chw<float>(clip),
                                                          clip_to_chw<float>(stat), label, cfg.weights);
                auto grads = ad::grad(sample.objective, params);
                SlotOut& slot = slots[static_cast<size_t>(s)];
                slot.grads.reserve(n_params);
                for (auto& g : grads) slot.grads.push_back(g.value());
                slot.ce = sample.ce;
                slot.adv = sample.adv;
                slot.ent = sample.ent;
                slot.gp = sample.gp;
                slot.finite = std::isfinite(static_cast<double>(sample.objective.value()[0]));
            }

            // ordered reduction keeps runs bit-identical across thread counts
            std::vector<Tensor<float>> gsum;
            gsum.reserve(n_params);
            for (size_t i = 0; i < n_params; ++i) gsum.emplace_back(params[i].shape());
            double ce = 0, adv = 0, ent = 0, gp = 0;
            bool finite = true;
            for (const auto& slot : slots) {
                for (size_t i = 0; i < n_params; ++i)
                    for (int64_t k = 0; k < gsum[i].numel(); ++k) gsum[i][k] += slot.grads[i][k];
                ce += slot.ce;
                adv += slot.adv;
                ent += slot.ent;
                gp += slot.gp;
                finite = finite && slot.finite;
            }
            const float inv_b = 1.0f / static_cast<float>(bsz);
            for (auto& g : gsum)
                for (auto& v : g.data) v *= inv_b;
            const LossBundle bundle =
                bundle_from_means(ce / bsz, adv / bsz, ent / bsz, gp / bsz, cfg.weights);

            if (!finite || !std::isfinite(bundle.total)) {
                std::string ids;
                for (int s = 0; s < bsz; ++s) {
                    if (s) ids += ",";
                    ids += train_set[static_cast<size_t>(order[static_cast<size_t>(lo + s)])].id;
                }
                throw TrainAbortError("non-finite loss at step " + std::to_string(gstep) +
                                      "; batch ids: " + ids);
            }

            opt.step(params, gsum, lr);
            result.steps.push_back({gstep, bundle.ce, bundle.adv, bundle.ent, bundle.gp,
                                    bundle.total, lr});
            ++gstep;
        }

        const double acc = validation_accuracy(enc, val_set);
        result.vals.push_back({epoch, acc});
        if (acc > result.best_val_acc || result.best_epoch < 0) {
            result.best_val_acc = acc;
            result.best_epoch = epoch;
            save_checkpoint(out_dir / "ckpt_best.bin", enc, root_rng.serialize());
        }
    }

    save_checkpoint(out_dir / "ckpt_last.bin", enc, root_rng.serialize());
    save_history(out_dir / "history.jsonl", result);
    return result;
}

double stability_score(const std::vector<double>& val_acc) {
    if (val_acc.size() < 5)
        throw std::invalid_argument("stability_score: need at least 5 validation points");
    const size_t start = val_acc.size() / 2;
    const size_t k = val_acc.size() - start;
    double mean = 0;
    for (size_t i = start; i < val_acc.size(); ++i) mean += val_acc[i];
    mean /= static_cast<double>(k);
    double var = 0;
    for (size_t i = start; i < val_acc.size(); ++i)
        var += (val_acc[i] - mean) * (val_acc[i] - mean);
    return std::sqrt(var / static_cast<double>(k));
}

void save_history(const std::filesystem::path& path, const FitResult& fit) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_history: cannot open " + path.string());
    for (const auto& s : fit.steps) {
        nlohmann::json j{{"kind", "step"}, {"step", s.step}, {"ce", s.ce}, {"adv", s.adv},
                         {"ent", s.ent},   {"gp", s.gp},     {"total", s.total}, {"lr", s.lr}};
        f << j.dump() << '\n';
    }
    for (const auto& v : fit.vals) {
        nlohmann::json j{{"kind", "val"}, {"epoch", v.epoch}, {"acc", v.acc}};
        f << j.dump() << '\n';
    }
    nlohmann::json j{{"kind", "summary"},
                     {"best_epoch", fit.best_epoch},
                     {"best_val_acc", fit.best_val_acc}};
    f << j.dump() << '\n';
    if (!f) throw std::runtime_error("save_history: write failed for " + path.string());
}

FitResult load_history(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_history: cannot open " + path.string());
    FitResult fit;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "step") {
            fit.steps.push_back({j.at("step").get<int64_t>(), j.at("ce").get<double>(),
                                 j.at("adv").get<double>(), j.at("ent").get<double>(),
                                 j.at("gp").get<double>(), j.at("total").get<double>(),
                                 j.at("lr").get<double>()});
        } else if (kind == "val") {
            fit.vals.push_back({j.at("epoch").get<int>(), j.at("acc").get<double>()});
        } else if (kind == "summary") {
            fit.best_epoch = j.at("best_epoch").get<int>();
            fit.best_val_acc = j.at("best_val_acc").get<double>();
        }
    }
    return fit;
}

}  // namespace vidbias
