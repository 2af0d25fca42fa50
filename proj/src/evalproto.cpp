#include "vidbias/evalproto.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "vidbias/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vidbias {

double top1(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.empty() || predictions.size() != labels.size())
        throw std::invalid_argument("top1: empty or mismatched inputs");
    int64_t correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double contrasted_accuracy(std::span<const PairPrediction> pairs) {
    if (pairs.empty()) throw std::invalid_argument("contrasted_accuracy: empty input");
    int64_t hits = 0;
    for (const auto& p : pairs)
        if (p.scuba_pred == p.label && p.scufo_pred != p.label) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pairs.size());
}

MetricsReport evaluate(const Encoder<float>& enc, const std::filesystem::path& bench_dir,
                       const std::filesystem::path& data_dir) {
    const auto rows = load_bench_manifest(bench_dir / "manifest.jsonl");
    if (rows.empty()) throw std::runtime_error("evaluate: empty benchmark manifest");

    std::vector<int> preds(rows.size(), -1);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(rows.size()); ++i) {
        const auto& row = rows[static_cast<size_t>(i)];
        const VideoClip clip = load_clip(bench_dir / row.path, /*want_mask=*/false);
        preds[static_cast<size_t>(i)] = predict_class(enc, clip);
    }

    // group per family/kind, join pairs on pair_id
    std::map<std::string, std::vector<int>> fam_scuba_pred, fam_scuba_label;
    std::map<std::string, std::vector<int>> fam_scufo_pred, fam_scufo_label;
    std::vector<int> confl_pred, confl_label;
    std::map<std::string, PairPrediction> pairs;
    std::map<std::string, std::string> pair_family;

    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const int pred = preds[i];
        if (row.kind == "scuba") {
            fam_scuba_pred[row.family].push_back(pred);
            fam_scuba_label[row.family].push_back(row.label);
            auto& pp = pairs[row.pair_id];
            pp.scuba_pred = pred;
            pp.label = row.label;
            pair_family[row.pair_id] = row.family;
        } else if (row.kind == "scufo") {
            fam_scufo_pred[row.family].push_back(pred);
            fam_scufo_label[row.family].push_back(row.label);
            auto& pp = pairs[row.pair_id];
            pp.scufo_pred = pred;
            pp.label = row.label;
        } else if (row.kind == "conflfg") {
            confl_pred.push_back(pred);
            confl_label.push_back(row.label);
        }
    }

    MetricsReport report;
    double scuba_sum = 0, scufo_sum = 0;
    int n_fam = 0;
    for (const auto& fam : kBgFamilies) {
        const auto it = fam_scuba_pred.find(fam);
        if (it == fam_scuba_pred.end()) continue;
        ++n_fam;
        const double sa = top1(it->second, fam_scuba_label[fam]);
        const double so = top1(fam_scufo_pred[fam], fam_scufo_label[fam]);
        report.scuba_per_family[fam] = sa;
        report.scufo_per_family[fam] = so;
        scuba_sum += sa;
        scufo_sum += so;
    }
    if (n_fam == 0) throw std::runtime_error("evaluate: no scuba rows in manifest");
    report.avg_scuba = scuba_sum / n_fam;
    report.avg_scufo = scufo_sum / n_fam;

    std::vector<PairPrediction> pair_list;
    std::map<std::string, std::vector<PairPrediction>> fam_pairs;
    for (const auto& [pid, pp] : pairs) {
        if (pp.scuba_pred < 0 || pp.scufo_pred < 0)
            throw std::runtime_error("evaluate: unpaired benchmark row " + pid);
        pair_list.push_back(pp);
        fam_pairs[pair_family[pid]].push_back(pp);
    }
    report.n_pairs = static_cast<int>(pair_list.size());
    report.contrasted = contrasted_accuracy(pair_list);
    for (const auto& [fam, fp] : fam_pairs) report.contrasted_per_family[fam] = contrasted_accuracy(fp);
    if (!confl_pred.empty()) report.conflfg = top1(confl_pred, confl_label);

    // IID top-1 over the original test split
    const auto iid_rows = load_manifest(data_dir / "iid_test" / "manifest.jsonl");
    std::vector<int> iid_preds(iid_rows.size()), iid_labels(iid_rows.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int64_t i = 0; i < static_cast<int64_t>(iid_rows.size()); ++i) {
        const VideoClip clip = load_clip(data_dir / iid_rows[static_cast<size_t>(i)].path, false);
        iid_preds[static_cast<size_t>(i)] = predict_class(enc, clip);
        iid_labels[static_cast<size_t>(i)] = iid_rows[static_cast<size_t>(i)].label;
    }
    report.iid_top1 = top1(iid_preds, iid_labels);

    check_report_invariants(report);
    return report;
}

void check_report_invariants(const MetricsReport& report) {
    constexpr double tol = 1e-9;
    auto in_range = [](double v) { return v >= -1e-9 && v <= 100.0 + 1e-9; };
    for (const auto& [fam, v] : report.scuba_per_family)
        if (!in_range(v)) throw std::logic_error("report: scuba accuracy out of range for " + fam);
    for (const auto& [fam, v] : report.scufo_per_family)
        if (!in_range(v)) throw std::logic_error("report: scufo accuracy out of range for " + fam);
    if (!in_range(report.iid_top1) || !in_range(report.avg_scuba) || !in_range(report.avg_scufo) ||
        !in_range(report.conflfg) || !in_range(report.contrasted))
        throw std::logic_error("report: value out of [0, 100]");
    if (report.contrasted > report.avg_scuba + tol)
        throw std::logic_error("report: contrasted exceeds avg scuba");
    if (report.contrasted > 100.0 - report.avg_scufo + tol)
        throw std::logic_error("report: contrasted exceeds 100 - avg scufo");
    for (const auto& [fam, v] : report.contrasted_per_family) {
        const auto sa = report.scuba_per_family.find(fam);
        const auto so = report.scufo_per_family.find(fam);
        if (sa != report.scuba_per_family.end() && v > sa->second + tol)
            throw std::logic_error("report: contrasted exceeds scuba for " + fam);
        if (so != report.scufo_per_family.end() && v > 100.0 - so->second + tol)
            throw std::logic_error("report: contrasted exceeds 100 - scufo for " + fam);
    }
}

nlohmann::json report_to_json(const MetricsReport& r) {
    return nlohmann::json{{"iid_top1", r.iid_top1},
                          {"scuba_per_family", r.scuba_per_family},
                          {"scufo_per_family", r.scufo_per_family},
                          {"contrasted_per_family", r.contrasted_per_family},
                          {"avg_scuba", r.avg_scuba},
                          {"avg_scufo", r.avg_scufo},
                          {"conflfg", r.conflfg},
                          {"contrasted", r.contrasted},
                          {"n_pairs", r.n_pairs}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    j.at("iid_top1").get_to(r.iid_top1);
    j.at("scuba_per_family").get_to(r.scuba_per_family);
    j.at("scufo_per_family").get_to(r.scufo_per_family);
    j.at("contrasted_per_family").get_to(r.contrasted_per_family);
    j.at("avg_scuba").get_to(r.avg_scuba);
    j.at("avg_scufo").get_to(r.avg_scufo);
    j.at("conflfg").get_to(r.conflfg);
    j.at("contrasted").get_to(r.contrasted);
    j.at("n_pairs").get_to(r.n_pairs);
    return r;
}

std::string render_report_table(const MetricsReport& r) {
    char buf[256];
    std::string out;
    out += "metric                     value\n";
    out += "-------------------------  ------\n";
    auto line = [&](const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%-25s  %6.2f\n", name, v);
        out += buf;
    };
    line("iid_top1", r.iid_top1);
    for (const auto& [fam, v] : r.scuba_per_family)
        line(("scuba/" + fam).c_str(), v);
    line("avg_scuba", r.avg_scuba);
    for (const auto& [fam, v] : r.scufo_per_family)
        line(("scufo/" + fam).c_str(), v);
    line("avg_scufo", r.avg_scufo);
    line("conflfg", r.conflfg);
    line("contrasted", r.contrasted);
    std::snprintf(buf, sizeof(buf), "%-25s  %6d\n", "n_pairs", r.n_pairs);
    out += buf;
    return out;
}

}  // namespace vidbias
