// Command-line front end: dataset generation, benchmark construction,
// training, evaluation, ablation sweeps, and plotting.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vidbias/benchbuild.hpp"
#include "vidbias/config.hpp"
#include "vidbias/evalproto.hpp"
#include "vidbias/report.hpp"
#include "vidbias/synthvid.hpp"
#include "vidbias/trainer.hpp"

namespace fs = std::filesystem;
using namespace vidbias;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    std::string tag;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config file (json)");
    cmd->add_option("--set", opts.overrides, "override config keys, e.g. --set train.epochs=5")
        ->take_all();
    cmd->add_option("--seed", opts.seed, "override the global seed");
    cmd->add_option("--tag", opts.tag, "run tag");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
    nlohmann::json j = nlohmann::json::object();
    if (!opts.config_path.empty()) {
        std::ifstream f(opts.config_path);
        if (!f) throw ConfigError("cannot open config file " + opts.config_path);
        try {
            f >> j;
        } catch (const std::exception& e) {
            throw ConfigError("config file is not valid json: " + std::string(e.what()));
        }
    }
    for (const auto& kv : opts.overrides) apply_override(j, kv);
    if (opts.seed >= 0) j["seed"] = static_cast<uint64_t>(opts.seed);
    if (!opts.tag.empty()) j["tag"] = opts.tag;
    if (const char* env_root = std::getenv("VIDBIAS_OUT_ROOT")) j["out_root"] = env_root;
    return config_from_json(j);
}

int run_gen_data(const ExperimentConfig& cfg, const fs::path& out) {
    fs::create_directories(out);
    const int n_val = std::max(1, static_cast<int>(std::lround(cfg.val_fraction * cfg.n_train_per_class)));
    write_dataset_meta(out, cfg.data);
    const auto train = build_split(cfg.data, cfg.n_train_per_class, "train", out);
    const auto val = build_split(cfg.data, n_val, "val", out);
    const auto iid = build_split(cfg.data, cfg.n_test_per_class, "iid_test", out);
    const auto ood = build_split(cfg.data, cfg.n_test_per_class, "ood_test", out);
    std::cout << "dataset written to " << out.string() << "\n"
              << "  train: " << train.size() << "  val: " << val.size()
              << "  iid_test: " << iid.size() << "  ood_test: " << ood.size() << "\n"
              << "  content hash: " << hex64(hash_tree(out)) << "\n";
    return kExitOk;
}

int run_build_bench(const fs::path& data, const fs::path& out, int k, uint64_t seed,
                    const std::string& split) {
    fs::create_directories(out);
    const auto summary = build_benchmark(data, split, out, k, seed);
    int n_scuba = 0, n_scufo = 0, n_confl = 0;
    for (const auto& row : summary.rows) {
        if (row.kind == "scuba") ++n_scuba;
        else if (row.kind == "scufo") ++n_scufo;
        else ++n_confl;
    }
    std::cout << "benchmark written to " << out.string() << "\n"
              << "  scuba: " << n_scuba << "  scufo: " << n_scufo << "  conflfg: " << n_confl
              << "  skipped: " << summary.skipped_sources.size() << "\n";
    return kExitOk;
}

int run_train(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out) {
    fs::create_directories(out);
    const DatasetMeta meta = load_dataset_meta(data);
    EncoderConfig ec = cfg.encoder;
    ec.n_classes = meta.spec.n_classes;
    ec.clip_t = meta.spec.clip_len;
    ec.clip_h = meta.spec.height;
    ec.clip_w = meta.spec.width;
    Encoder<float> enc(ec);
    std::cout << "training encoder with " << enc.param_count() << " parameters\n";

    const FitResult result = fit(cfg.train, enc, data, out);
    write_run_meta(out, config_to_json(cfg),
                   {{"dataset_hash", hex64(hash_tree(data))},
                    {"best_epoch", result.best_epoch},
                    {"best_val_acc", result.best_val_acc}});
    std::cout << "best val acc " << result.best_val_acc << "% at epoch " << result.best_epoch
              << "; outputs in " << out.string() << "\n";
    return kExitOk;
}

int run_eval(const fs::path& model, const fs::path& bench, const fs::path& data,
             const fs::path& out) {
    Encoder<float> enc = load_checkpoint<float>(model);
    const MetricsReport report = evaluate(enc, bench, data);
    const std::string table = render_report_table(report);
    std::cout << table;
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream fj(out / "report.json", std::ios::trunc);
        fj << report_to_json(report).dump(2) << '\n';
        std::ofstream ft(out / "report_table.txt", std::ios::trunc);
        ft << table;
        write_run_meta(out, nlohmann::json::object(),
                       {{"model", model.string()},
                        {"benchmark_hash", hex64(hash_tree(bench))},
                        {"dataset_hash", hex64(hash_tree(data))}});
    }
    return kExitOk;
}

struct AblationCell {
    std::string name;
    LossWeights weights;
};

std::vector<AblationCell> make_grid(const std::string& grid, const LossWeights& defaults) {
    std::vector<AblationCell> cells;
    auto w = [&](double a, double e, double g, FrameStrategy s = FrameStrategy::Middle) {
        LossWeights lw = defaults;
        lw.w_adv = a;
        lw.w_ent = e;
        lw.w_gp = g;
        lw.frame_strategy = s;
        return lw;
    };
    const double A = defaults.w_adv, E = defaults.w_ent, G = defaults.w_gp;
    if (grid == "components") {
        cells = {{"a_ce", w(0, 0, 0)},      {"b_adv", w(A, 0, 0)},
                 {"c_ent", w(0, E, 0)},     {"d_gp", w(0, 0, G)},
                 {"e_adv_ent", w(A, E, 0)}, {"f_adv_gp", w(A, 0, G)},
                 {"g_ent_gp", w(0, E, G)},  {"h_full", w(A, E, G)}};
    } else if (grid == "frames") {
        cells = {{"random", w(A, E, G, FrameStrategy::Random)},
                 {"first", w(A, E, G, FrameStrategy::First)},
                 {"middle", w(A, E, G, FrameStrategy::Middle)},
                 {"last", w(A, E, G, FrameStrategy::Last)}};
    } else if (grid == "weights-adv") {
        for (double v : {0.0, 0.5, 1.0, 2.0, 4.0})
            cells.push_back({"adv_" + std::to_string(v).substr(0, 3), w(v, E, G)});
    } else if (grid == "weights-ent") {
        for (double v : {0.0, 2.0, 4.0, 8.0})
            cells.push_back({"ent_" + std::to_string(static_cast<int>(v)), w(A, v, G)});
    } else if (grid == "weights-gp") {
        for (double v : {0.0, 5.0, 10.0, 20.0})
            cells.push_back({"gp_" + std::to_string(static_cast<int>(v)), w(A, E, v)});
    } else {
        throw ConfigError("unknown ablation grid: " + grid);
    }
    return cells;
}

int run_ablate(const ExperimentConfig& cfg, const std::string& grid, const fs::path& out) {
    fs::create_directories(out);
    const fs::path data = out / "data";
    const fs::path bench = out / "bench";
    if (!fs::exists(data / "meta.json")) run_gen_data(cfg, data);
    if (!fs::exists(bench / "manifest.jsonl"))
        run_build_bench(data, bench, cfg.k_backgrounds, derive_seed(cfg.seed, "bench", 0), "iid_test");
    const std::string data_hash = hex64(hash_tree(data));

    const auto cells = make_grid(grid, cfg.train.weights);
    nlohmann::json rows = nlohmann::json::array();
    std::string table;
    table += "cell           IID   AvgSCUBA  AvgSCUFO  ConflFG  Contrasted\n";
    table += "-------------  ----- --------  --------  -------  ----------\n";

    for (const auto& cell : cells) {
        const fs::path cell_dir = out / "cells" / cell.name;
        fs::create_directories(cell_dir);
        nlohmann::json row{{"cell", cell.name}, {"dataset_hash", data_hash}};
        try {
            ExperimentConfig cc = cfg;
            cc.train.weights = cell.weights;
            const DatasetMeta meta = load_dataset_meta(data);
            EncoderConfig ec = cc.encoder;
            ec.n_classes = meta.spec.n_classes;
            ec.clip_t = meta.spec.clip_len;
            ec.clip_h = meta.spec.height;
            ec.clip_w = meta.spec.width;
            Encoder<float> enc(ec);
            fit(cc.train, enc, data, cell_dir);
            Encoder<float> best = load_checkpoint<float>(cell_dir / "ckpt_best.bin");
            const MetricsReport rep = evaluate(best, bench, data);
            std::ofstream fj(cell_dir / "report.json", std::ios::trunc);
            fj << report_to_json(rep).dump(2) << '\n';
            row["report"] = report_to_json(rep);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-13s  %5.1f  %7.1f  %8.1f  %7.1f  %10.1f\n",
                          cell.name.c_str(), rep.iid_top1, rep.avg_scuba, rep.avg_scufo,
                          rep.conflfg, rep.contrasted);
            table += buf;
        } catch (const std::exception& e) {
            row["error"] = e.what();
            table += cell.name + "  FAILED: " + e.what() + "\n";
            std::cerr << "cell " << cell.name << " failed: " << e.what() << "\n";
        }
        rows.push_back(row);
    }

    std::ofstream fj(out / "ablation.json", std::ios::trunc);
    fj << rows.dump(2) << '\n';
    std::ofstream ft(out / "ablation_table.txt", std::ios::trunc);
    ft << table;
    std::cout << table;
    write_run_meta(out, config_to_json(cfg), {{"grid", grid}, {"dataset_hash", data_hash}});
    return kExitOk;
}

int run_plot(const std::vector<std::string>& histories, const std::vector<std::string>& reports,
             const fs::path& out) {
    if (histories.empty() && reports.empty())
        throw DataError("plot: need at least one --history or --report input");
    fs::create_directories(out);

    if (!histories.empty()) {
        std::vector<Series> val_series, loss_series;
        for (const auto& hp : histories) {
            const FitResult h = load_history(hp);
            if (h.vals.empty() && h.steps.empty())
                throw DataError("plot: empty history " + hp);
            Series vs{fs::path(hp).parent_path().filename().string().empty()
                          ? fs::path(hp).filename().string()
                          : fs::path(hp).parent_path().filename().string(),
                      {}, {}};
            for (const auto& v : h.vals) {
                vs.x.push_back(v.epoch);
                vs.y.push_back(v.acc);
            }
            if (vs.x.empty()) throw DataError("plot: history has no validation points: " + hp);
            val_series.push_back(std::move(vs));
            Series ls{val_series.back().name, {}, {}};
            for (const auto& s : h.steps) {
                ls.x.push_back(static_cast<double>(s.step));
                ls.y.push_back(s.total);
            }
            loss_series.push_back(std::move(ls));
        }
        write_line_chart_svg(out / "stability.svg", "validation accuracy during training",
                             val_series, "epoch", "val top-1 (%)");
        write_line_chart_svg(out / "loss.svg", "training objective", loss_series, "step", "total loss");
        std::cout << "wrote " << (out / "stability.svg").string() << "\n";
    }
    if (!reports.empty()) {
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& rp : reports) {
            std::ifstream f(rp);
            if (!f) throw DataError("plot: cannot open report " + rp);
            nlohmann::json j;
            try {
                f >> j;
            } catch (const std::exception& e) {
                throw DataError("plot: malformed report " + rp + ": " + e.what());
            }
            const MetricsReport rep = report_from_json(j);
            const std::string base = fs::path(rp).parent_path().filename().string();
            if (reports.size() == 1) {
                labels = {"iid", "avg_scuba", "avg_scufo", "conflfg", "contrasted"};
                values = {rep.iid_top1, rep.avg_scuba, rep.avg_scufo, rep.conflfg, rep.contrasted};
            } else {
                labels.push_back(base.empty() ? fs::path(rp).filename().string() : base);
                values.push_back(rep.contrasted);
            }
        }
        write_bar_chart_svg(out / "metrics.svg",
                            reports.size() == 1 ? "evaluation metrics (%)" : "contrasted accuracy (%)",
                            labels, values);
        std::cout << "wrote " << (out / "metrics.svg").string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic video debiasing lab"};
    app.require_subcommand(1);

    CommonOpts gen_opts, bench_opts, train_opts, ablate_opts;
    std::string gen_out, bench_data, bench_out, train_data, train_out;
    std::string eval_model, eval_bench, eval_data, eval_out;
    std::string ablate_grid = "components", ablate_out;
    std::string bench_split = "iid_test";
    int bench_k = 5;
    int64_t bench_seed = -1;
    std::vector<std::string> plot_histories, plot_reports;
    std::string plot_out = "plots";

    auto* gen = app.add_subcommand("gen-data", "generate the four dataset splits");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    auto* bench = app.add_subcommand("build-bench", "build scuba/scufo/conflfg benchmark");
    bench->add_option("--data", bench_data, "dataset directory")->required();
    bench->add_option("--out", bench_out, "benchmark output directory")->required();
    bench->add_option("--k", bench_k, "backgrounds per family per clip");
    bench->add_option("--seed", bench_seed, "benchmark seed");
    bench->add_option("--split", bench_split, "source split (default iid_test)");

    auto* train = app.add_subcommand("train", "train the classifier");
    add_common(train, train_opts);
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "run output directory")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a benchmark");
    eval->add_option("--model", eval_model, "checkpoint path")->required();
    eval->add_option("--bench", eval_bench, "benchmark directory")->required();
    eval->add_option("--data", eval_data, "dataset directory (for the iid split)")->required();
    eval->add_option("--out", eval_out, "report output directory");

    auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
    add_common(ablate, ablate_opts);
    ablate->add_option("--grid", ablate_grid,
                       "components | frames | weights-adv | weights-ent | weights-gp");
    ablate->add_option("--out", ablate_out, "ablation output directory")->required();

    auto* plot = app.add_subcommand("plot", "render training curves and metric charts");
    plot->add_option("--history", plot_histories, "history.jsonl paths")->take_all();
    plot->add_option("--report", plot_reports, "report.json paths")->take_all();
    plot->add_option("--out", plot_out, "output directory for svg files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen_data(resolve_config(gen_opts), gen_out);
        if (bench->parsed()) {
            const uint64_t seed = bench_seed >= 0 ? static_cast<uint64_t>(bench_seed) : 1;
            return run_build_bench(bench_data, bench_out, bench_k, seed, bench_split);
        }
        if (train->parsed()) return run_train(resolve_config(train_opts), train_data, train_out);
        if (eval->parsed()) return run_eval(eval_model, eval_bench, eval_data, eval_out);
        if (ablate->parsed()) return run_ablate(resolve_config(ablate_opts), ablate_grid, ablate_out);
        if (plot->parsed()) return run_plot(plot_histories, plot_reports, plot_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainAbortError& e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return kExitTrain;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
