// Acceptance suite: one pass/fail line per criterion. Criteria 6-8 share
// three seeded end-to-end pipelines (dataset -> benchmark -> four training
// runs -> evaluation), which dominate the runtime.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vidbias/benchbuild.hpp"
#include "vidbias/config.hpp"
#include "vidbias/evalproto.hpp"
#include "vidbias/losses.hpp"
#include "vidbias/report.hpp"
#include "vidbias/synthvid.hpp"
#include "vidbias/trainer.hpp"

using namespace vidbias;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double elapsed_s) {
    std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str(), elapsed_s);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

EncoderConfig oracle_encoder_config(int n_classes = 4) {
    EncoderConfig c;
    c.channels = {2, 4};
    c.strides = {{1, 2, 2}, {2, 2, 2}};
    c.norm_groups = 2;
    c.n_classes = n_classes;
    c.clip_t = 4;
    c.clip_h = 8;
    c.clip_w = 8;
    c.clip_c = 3;
    c.init_seed = 7;
    return c;
}

template <class S>
Tensor<S> random_input(const EncoderConfig& c, uint64_t seed) {
    Rng rng(seed);
    Tensor<S> x({c.clip_c, c.clip_t, c.clip_h, c.clip_w});
    for (auto& v : x.data) v = static_cast<S>(rng.u01());
    return x;
}

// ---------------------------------------------------------------------------

void criterion1_loss_analytics() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;

    for (const int n : {2, 8, 51, 400}) {
        const std::vector<double> uniform(static_cast<size_t>(n), 1.0 / n);
        if (std::abs(entropy_loss(uniform) + std::log(n)) > 1e-9) {
            pass = false;
            detail = "entropy(uniform) mismatch at N=" + std::to_string(n);
        }
    }

    Rng rng(5);
    for (int trial = 0; trial < 100 && pass; ++trial) {
        std::vector<double> p(8);
        double z = 0;
        for (auto& v : p) z += (v = rng.u01() + 1e-6);
        for (auto& v : p) v /= z;
        const int y = rng.uniform_int(8);
        if (adversarial_loss(p, y) != -cross_entropy(p, y)) {
            pass = false;
            detail = "adversarial_loss != -cross_entropy";
        }
    }

    if (pass) {
        Encoder<float> enc(oracle_encoder_config());
        const Tensor<float> motion = random_input<float>(enc.config(), 11);
        const Tensor<float> stat = random_input<float>(enc.config(), 12);
        LossWeights w;  // defaults (1, 4, 10, middle)
        const auto s = combined_sample_loss<float>(enc, motion, stat, 1, w);
        const LossBundle b = bundle_from_means(s.ce, s.adv, s.ent, s.gp, w);
        if (std::abs(b.total - (b.ce + w.w_adv * b.adv + w.w_ent * b.ent + w.w_gp * b.gp)) > 1e-9) {
            pass = false;
            detail = "combined total does not decompose";
        }
    }

    const double dt = seconds_since(t0);
    if (dt >= 1.0) {
        pass = false;
        detail += " runtime over 1s";
    }
    if (pass) detail = "uniform-entropy identities, exact antisymmetry, bundle decomposition";
    report(1, "loss analytics", pass, detail, dt);
}

void criterion2_gradient_oracle() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;

    const EncoderConfig cfg = oracle_encoder_config();
    Encoder<double> enc(cfg);
    const int64_t n_params = enc.param_count();
    if (n_params > 10000) {
        pass = false;
        detail = "oracle net exceeds 10k parameters";
    }

    // input-gradient of the logit sum vs central finite differences
    const Tensor<double> xt = random_input<double>(cfg, 21);
    ad::Var<double> leaf = ad::Var<double>::leaf(xt);
    const Tensor<double> g = ad::grad(ad::sum_to_scalar(enc.forward(leaf)), {leaf})[0].value();
    auto f = [&](const Tensor<double>& x) {
        return ad::sum_to_scalar(enc.forward(ad::Var<double>::constant(x))).value()[0];
    };
    Rng pick(3);
    double worst = 0;
    const double eps = 1e-5;
    for (int k = 0; k < 100; ++k) {
        const int64_t i = pick.uniform_int(static_cast<int>(xt.numel()));
        Tensor<double> xp = xt, xm = xt;
        xp[i] += eps;
        xm[i] -= eps;
        const double fd = (f(xp) - f(xm)) / (2 * eps);
        const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - g[i]) / denom);
    }
    if (worst >= 1e-3) {
        pass = false;
        detail = "fd rel err " + std::to_string(worst);
    }

    // adversarial parameter gradient is the exact negation of the static CE gradient
    const Tensor<double> xbar = random_input<double>(cfg, 22);
    const auto g_ce =
        ad::grad(ce_from_logits(enc.forward(ad::Var<double>::constant(xbar)), 2), enc.params());
    const auto g_adv = ad::grad(ad::neg(ce_from_logits(enc.forward(ad::Var<double>::constant(xbar)), 2)),
                                enc.params());
    double worst_neg = 0;
    for (size_t i = 0; i < g_ce.size(); ++i)
        for (int64_t k = 0; k < g_ce[i].value().numel(); ++k)
            worst_neg = std::max(worst_neg, std::abs(g_ce[i].value()[k] + g_adv[i].value()[k]));
    if (worst_neg > 1e-9) {
        pass = false;
        detail = "adv gradient negation off by " + std::to_string(worst_neg);
    }

    const double dt = seconds_since(t0);
    if (dt >= 30.0) {
        pass = false;
        detail += " runtime over 30s";
    }
    if (pass)
        detail = std::to_string(n_params) + " params, fd rel err " + std::to_string(worst) +
                 ", negation err " + std::to_string(worst_neg);
    report(2, "gradient oracle", pass, detail, dt);
}

void criterion3_second_order_descent() {
    const auto t0 = Clock::now();
    const EncoderConfig cfg = oracle_encoder_config();
    Encoder<float> enc(cfg);

    // frozen batch of static clips
    std::vector<Tensor<float>> batch;
    for (uint64_t s = 0; s < 4; ++s) batch.push_back(random_input<float>(cfg, 40 + s));

    auto mean_penalty = [&]() {
        double acc = 0;
        for (const auto& x : batch) {
            ad::Var<float> xbar = ad::Var<float>::leaf(x);
            acc += gradient_penalty(enc, xbar, GpMode::LogitSum).value()[0];
        }
        return acc / static_cast<double>(batch.size());
    };

    const double before = mean_penalty();

    // one AdamW step on the gradient-penalty term alone
    std::vector<Tensor<float>> gsum;
    for (const auto& p : enc.params()) gsum.emplace_back(p.shape());
    for (const auto& x : batch) {
        ad::Var<float> xbar = ad::Var<float>::leaf(x);
        auto grads = ad::grad(gradient_penalty(enc, xbar, GpMode::LogitSum), enc.params());
        for (size_t i = 0; i < gsum.size(); ++i)
            for (int64_t k = 0; k < gsum[i].numel(); ++k)
                gsum[i][k] += grads[i].value()[k] / static_cast<float>(batch.size());
    }
    AdamW opt(0.9, 0.999, 0.0);
    opt.step(enc.params(), gsum, 1e-3);

    const double after = mean_penalty();
    const bool pass = after < before && seconds_since(t0) < 30.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "||grad||: %.6f -> %.6f", before, after);
    report(3, "second-order descent on the gradient penalty", pass, buf, seconds_since(t0));
}

struct SeedArtifacts {
    fs::path data;
    fs::path bench;
};

struct RowResult {
    MetricsReport rep;
    FitResult fit;
    double iid_val_best = 0;
};

// rows of the component grid used by criteria 6 and 7
const std::vector<std::pair<std::string, std::array<double, 3>>> kRows = {
    {"a", {0, 0, 0}}, {"b", {1, 0, 0}}, {"e", {1, 4, 0}}, {"h", {1, 4, 10}}};

void criterion4_benchmark_invariants(const fs::path& data, const fs::path& bench) {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    int n_pairs = 0;

    const auto rows = load_bench_manifest(bench / "manifest.jsonl");
    std::map<std::string, const BenchRow*> scuba_by_pair;
    for (const auto& row : rows)
        if (row.kind == "scuba") scuba_by_pair[row.pair_id] = &row;

    // source clips for inside-mask checks
    const auto src_rows = load_manifest(data / "iid_test" / "manifest.jsonl");
    std::map<std::string, const ManifestRow*> src_by_id;
    for (const auto& row : src_rows) src_by_id[row.id] = &row;

    for (const auto& row : rows) {
        if (!pass) break;
        if (row.kind == "scufo") {
            ++n_pairs;
            const VideoClip scufo = load_clip(bench / row.path);
            if (motion_energy(scufo) != 0.0) {
                pass = false;
                detail = "scufo with motion: " + row.pair_id;
                break;
            }
            const VideoClip scuba = load_clip(bench / scuba_by_pair.at(row.pair_id)->path);
            const size_t frame_sz = static_cast<size_t>(scuba.h) * scuba.w * scuba.c;
            const float* ref = scuba.frames.data() + row.frame_index * frame_sz;
            for (int t = 0; t < scufo.t && pass; ++t)
                for (size_t i = 0; i < frame_sz; ++i)
                    if (scufo.frames[t * frame_sz + i] != ref[i]) {
                        pass = false;
                        detail = "scufo frame mismatch: " + row.pair_id;
                        break;
                    }
        } else if (row.kind == "scuba") {
            const VideoClip scuba = load_clip(bench / row.path);
            const VideoClip src = load_clip(data / src_by_id.at(row.source_id)->path);
            const Image bg = gen_background(row.family, row.bg_seed, scuba.h, scuba.w);
            for (int t = 0; t < scuba.t && pass; ++t)
                for (int y = 0; y < scuba.h && pass; ++y)
                    for (int x = 0; x < scuba.w && pass; ++x)
                        for (int c = 0; c < scuba.c; ++c) {
                            const float got = scuba.at(t, y, x, c);
                            const float want = src.mask_at(t, y, x) != 0.f ? src.at(t, y, x, c)
                                                                           : bg.at(y, x, c);
                            if (got != want) {
                                pass = false;
                                detail = "scuba leakage at " + row.pair_id;
                                break;
                            }
                        }
        }
    }

    if (pass && n_pairs < 1000) {
        pass = false;
        detail = "only " + std::to_string(n_pairs) + " pairs";
    }
    const double dt = seconds_since(t0);
    if (dt >= 120.0) {
        pass = false;
        detail += " runtime over 2min";
    }
    if (pass)
        detail = std::to_string(n_pairs) + " pairs, zero scufo motion, bit-exact masks";
    report(4, "benchmark invariants", pass, detail, dt);
}

void criterion5_metric_oracle(const std::vector<MetricsReport>& produced) {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;

    Rng rng(23);
    std::vector<PairPrediction> pairs;
    for (int i = 0; i < 10000; ++i)
        pairs.push_back({rng.uniform_int(8), rng.uniform_int(8), rng.uniform_int(8)});
    int64_t hits = 0;
    for (const auto& p : pairs)
        if (p.scuba_pred == p.label && p.scufo_pred != p.label) ++hits;
    const double oracle = 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
    if (contrasted_accuracy(pairs) != oracle) {
        pass = false;
        detail = "brute-force mismatch";
    }

    int checked = 0;
    for (const auto& rep : produced) {
        try {
            check_report_invariants(rep);
            ++checked;
        } catch (const std::exception& e) {
            pass = false;
            detail = std::string("report invariant violated: ") + e.what();
        }
    }
    if (pass)
        detail = "10k-pair enumeration exact, invariants hold on " + std::to_string(checked) +
                 " reports";
    report(5, "metric oracle", pass, detail, seconds_since(t0));
}

}  // namespace

int main() {
    const auto t_all = Clock::now();
    std::printf("acceptance suite starting\n");
    std::fflush(stdout);

    criterion1_loss_analytics();
    criterion2_gradient_oracle();
    criterion3_second_order_descent();

    // ---- shared end-to-end pipelines for criteria 4-8 ----
    const fs::path work = fs::current_path() / "acceptance_work";
    fs::remove_all(work);
    fs::create_directories(work);

    const std::vector<uint64_t> seeds = {1, 2, 3};
    // per seed, per row name -> results
    std::vector<std::map<std::string, RowResult>> results(seeds.size());
    std::vector<MetricsReport> all_reports;
    bool pipeline_ok = true;
    std::string pipeline_err;

    for (size_t si = 0; si < seeds.size() && pipeline_ok; ++si) {
        const uint64_t seed = seeds[si];
        try {
            ExperimentConfig cfg = config_from_json({{"seed", seed}});
            const fs::path data = work / ("data_s" + std::to_string(seed));
            const fs::path bench = work / ("bench_s" + std::to_string(seed));

            write_dataset_meta(data, cfg.data);
            build_split(cfg.data, cfg.n_train_per_class, "train", data);
            const int n_val =
                std::max(1, static_cast<int>(std::lround(cfg.val_fraction * cfg.n_train_per_class)));
            build_split(cfg.data, n_val, "val", data);
            build_split(cfg.data, cfg.n_test_per_class, "iid_test", data);
            build_split(cfg.data, cfg.n_test_per_class, "ood_test", data);
            build_benchmark(data, "iid_test", bench, cfg.k_backgrounds,
                            derive_seed(cfg.seed, "bench", 0));

            if (si == 0) criterion4_benchmark_invariants(data, bench);

            for (const auto& [name, w] : kRows) {
                const auto t_row = Clock::now();
                TrainConfig tc = cfg.train;
                tc.weights.w_adv = w[0];
                tc.weights.w_ent = w[1];
                tc.weights.w_gp = w[2];
                Encoder<float> enc(cfg.encoder);
                const fs::path run = work / ("run_s" + std::to_string(seed) + "_" + name);
                RowResult rr;
                rr.fit = fit(tc, enc, data, run);
                rr.iid_val_best = rr.fit.best_val_acc;
                Encoder<float> best = load_checkpoint<float>(run / "ckpt_best.bin");
                rr.rep = evaluate(best, bench, data);
                all_reports.push_back(rr.rep);
                std::printf("  seed %llu row %s: val %.1f iid %.1f scuba %.1f scufo %.1f "
                            "contrasted %.1f (%.0fs)\n",
                            static_cast<unsigned long long>(seed), name.c_str(), rr.iid_val_best,
                            rr.rep.iid_top1, rr.rep.avg_scuba, rr.rep.avg_scufo, rr.rep.contrasted,
                            seconds_since(t_row));
                std::fflush(stdout);
                results[si][name] = std::move(rr);
            }
            // benchmark payload is large; drop it once the seed is evaluated
            fs::remove_all(bench);
            fs::remove_all(data);
        } catch (const std::exception& e) {
            pipeline_ok = false;
            pipeline_err = e.what();
        }
    }

    criterion5_metric_oracle(all_reports);

    // ---- criterion 6: end-to-end trend ----
    {
        const double chance = 100.0 / 8;
        bool pass = pipeline_ok;
        std::string detail = pipeline_ok ? "" : ("pipeline failed: " + pipeline_err);
        for (size_t si = 0; si < seeds.size() && pass; ++si) {
            const auto& a = results[si].at("a");
            const auto& h = results[si].at("h");
            char buf[256];
            if (a.iid_val_best < 95.0) {
                std::snprintf(buf, sizeof(buf), "seed %zu baseline val %.1f < 95", si + 1,
                              a.iid_val_best);
                pass = false;
                detail = buf;
            } else if (a.rep.avg_scufo < 3 * chance) {
                std::snprintf(buf, sizeof(buf), "seed %zu baseline scufo %.1f < 3x chance", si + 1,
                              a.rep.avg_scufo);
                pass = false;
                detail = buf;
            } else if (h.rep.avg_scufo > 1.5 * chance) {
                std::snprintf(buf, sizeof(buf), "seed %zu debiased scufo %.1f > 1.5x chance", si + 1,
                              h.rep.avg_scufo);
                pass = false;
                detail = buf;
            } else if (h.rep.contrasted < 1.5 * a.rep.contrasted) {
                std::snprintf(buf, sizeof(buf), "seed %zu contrasted %.1f < 1.5x baseline %.1f",
                              si + 1, h.rep.contrasted, a.rep.contrasted);
                pass = false;
                detail = buf;
            } else if (std::abs(h.rep.iid_top1 - a.rep.iid_top1) > 5.0) {
                std::snprintf(buf, sizeof(buf), "seed %zu iid drop %.1f -> %.1f exceeds 5 points",
                              si + 1, a.rep.iid_top1, h.rep.iid_top1);
                pass = false;
                detail = buf;
            }
        }
        if (pass) detail = "all 3 seeds: biased baseline and debiased trend reproduced";
        report(6, "end-to-end trend reproduction", pass, detail, seconds_since(t_all));
    }

    // ---- criterion 7: ablation direction checks ----
    {
        bool pass = pipeline_ok;
        std::string detail = pipeline_ok ? "" : ("pipeline failed: " + pipeline_err);
        int ok_seeds = 0;
        if (pipeline_ok) {
            for (size_t si = 0; si < seeds.size(); ++si) {
                const auto& r = results[si];
                const double ch = r.at("h").rep.contrasted;
                const bool trivial_signature = r.at("b").rep.avg_scufo <= 5.0 &&
                                               r.at("b").rep.contrasted < ch;
                bool h_highest = true;
                for (const auto& [name, rr] : r)
                    if (name != "h" && rr.rep.contrasted >= ch) h_highest = false;
                if (trivial_signature && h_highest) ++ok_seeds;
            }
            pass = ok_seeds >= 2;
            detail = "ordering holds in " + std::to_string(ok_seeds) + "/3 seeds";
        }
        report(7, "ablation direction checks", pass, detail, seconds_since(t_all));
    }

    // ---- criterion 8: stability diagnostic ----
    {
        bool pass = pipeline_ok;
        std::string detail = pipeline_ok ? "" : ("pipeline failed: " + pipeline_err);
        if (pipeline_ok) {
            std::string scores;
            std::vector<Series> series;
            for (size_t si = 0; si < seeds.size(); ++si) {
                auto curve = [&](const std::string& row) {
                    std::vector<double> v;
                    for (const auto& p : results[si].at(row).fit.vals) v.push_back(p.acc);
                    return v;
                };
                const double with_gp = stability_score(curve("h"));
                const double without_gp = stability_score(curve("e"));
                char buf[96];
                std::snprintf(buf, sizeof(buf), " s%zu: with-gp %.2f vs without %.2f;", si + 1,
                              with_gp, without_gp);
                scores += buf;
                if (si == 0) {
                    for (const auto& row : {"h", "e"}) {
                        Series s{std::string(row) == "h" ? "with gradient penalty"
                                                         : "without gradient penalty",
                                 {}, {}};
                        for (const auto& p : results[si].at(row).fit.vals) {
                            s.x.push_back(p.epoch);
                            s.y.push_back(p.acc);
                        }
                        series.push_back(std::move(s));
                    }
                }
            }
            const fs::path plot = work / "stability.svg";
            write_line_chart_svg(plot, "validation stability, identical seeds", series, "epoch",
                                 "val top-1 (%)");
            pass = fs::exists(plot);
            detail = "reported:" + scores + " plot " + plot.string();
        }
        report(8, "stability diagnostic (reported)", pass, detail, seconds_since(t_all));
    }

    std::printf("acceptance suite done: %d failure(s), %.0fs total\n", g_failures,
                seconds_since(t_all));
    return g_failures == 0 ? 0 : 1;
}
