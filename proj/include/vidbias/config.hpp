#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vidbias/encoder.hpp"
#include "vidbias/synthvid.hpp"
#include "vidbias/trainer.hpp"

namespace vidbias {

inline constexpr const char* kCodeVersion = "0.1.0";

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTrain = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One file drives the whole pipeline: nested sections data / bench / encoder
// / train plus run bookkeeping. The global seed derives all sub-seeds.
struct ExperimentConfig {
    BiasSpec data;
    int n_train_per_class = 32;
    int n_test_per_class = 10;
    double val_fraction = 0.2;
    int k_backgrounds = 5;
    EncoderConfig encoder;
    TrainConfig train;
    std::string out_root = "runs";
    std::string tag = "run";
    uint64_t seed = 1;

    // Sub-seeds and shape fields follow the data section and the global seed.
    void resolve();
    void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig load_config_file(const std::filesystem::path& path);

// "section.key=value" override on the json form; value parsed as json when
// possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& keyval);

}  // namespace vidbias
