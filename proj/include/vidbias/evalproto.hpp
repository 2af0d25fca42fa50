#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidbias/benchbuild.hpp"
#include "vidbias/encoder.hpp"

namespace vidbias {

struct MetricsReport {
    double iid_top1 = 0;
    std::map<std::string, double> scuba_per_family;
    std::map<std::string, double> scufo_per_family;
    std::map<std::string, double> contrasted_per_family;
    double avg_scuba = 0;
    double avg_scufo = 0;
    double conflfg = 0;
    double contrasted = 0;
    int n_pairs = 0;
};

// Fraction correct x 100.
double top1(std::span<const int> predictions, std::span<const int> labels);

struct PairPrediction {
    int scuba_pred = -1;
    int scufo_pred = -1;
    int label = -1;
};

// 100 * mean of [scuba correct AND scufo incorrect].
double contrasted_accuracy(std::span<const PairPrediction> pairs);

// Single-clip inference over the benchmark manifest plus the iid_test split;
// averages over families are unweighted.
MetricsReport evaluate(const Encoder<float>& enc, const std::filesystem::path& bench_dir,
                       const std::filesystem::path& data_dir);

// contrasted <= avg_scuba and contrasted <= 100 - avg_scufo, per family and
// overall; all values in [0, 100]. Throws on violation.
void check_report_invariants(const MetricsReport& report);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
std::string render_report_table(const MetricsReport& report);

}  // namespace vidbias
