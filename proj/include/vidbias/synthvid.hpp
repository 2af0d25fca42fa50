#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidbias/clip.hpp"
#include "vidbias/rng.hpp"

namespace vidbias {

// Controls class count, spurious-cue vocabularies, and the strength of the
// cue-label correlation in the training distribution. rho = 1/n_cues means
// the cue carries no label information.
struct BiasSpec {
    int n_classes = 8;
    int n_bg_cues = 8;
    int n_fg_cues = 8;
    double rho_bg = 0.95;
    double rho_fg = 0.95;
    int clip_len = 8;
    int height = 64;
    int width = 64;
    uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument
};

inline void to_json(nlohmann::json& j, const BiasSpec& s) {
    j = nlohmann::json{{"n_classes", s.n_classes}, {"n_bg_cues", s.n_bg_cues},
                       {"n_fg_cues", s.n_fg_cues}, {"rho_bg", s.rho_bg},
                       {"rho_fg", s.rho_fg},       {"clip_len", s.clip_len},
                       {"height", s.height},       {"width", s.width},
                       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, BiasSpec& s) {
    j.at("n_classes").get_to(s.n_classes);
    j.at("n_bg_cues").get_to(s.n_bg_cues);
    j.at("n_fg_cues").get_to(s.n_fg_cues);
    j.at("rho_bg").get_to(s.rho_bg);
    j.at("rho_fg").get_to(s.rho_fg);
    j.at("clip_len").get_to(s.clip_len);
    j.at("height").get_to(s.height);
    j.at("width").get_to(s.width);
    j.at("seed").get_to(s.seed);
}

struct CueAssignment {
    int bg_cue = 0;
    int fg_cue = 0;
    bool aligned_bg = false;  // true iff bg_cue is the class-designated cue
    bool aligned_fg = false;
};

// Number of motion classes this generator defines; BiasSpec::n_classes may
// not exceed it. Classes are closed under horizontal mirroring so that the
// flip augmentation stays label-sound via flip_label_map.
int max_motion_classes();
std::vector<std::string> class_names(int n_classes);
std::vector<int> flip_label_map(int n_classes);

// With probability rho the cue equals the class-designated cue (cue index ==
// label modulo vocabulary size), otherwise uniform over the remaining cues.
CueAssignment assign_cues(int label, const BiasSpec& spec, Rng& rng);

// Background image for one bg cue: flat color plus a cue-specific stripe
// texture. Identical for every clip of the same dataset, so the cue is a
// purely static signal.
Image cue_background(int bg_cue, const BiasSpec& spec);

// Decomposed render output; render_clip composites these.
struct ClipLayers {
    Image background;               // static across frames
    VideoClip foreground;           // fg color everywhere, mask marks the shape
    std::vector<double> centroid_x;  // per-frame shape centroid (continuous)
    std::vector<double> centroid_y;
};

ClipLayers render_layers(int label, const CueAssignment& cues, const BiasSpec& spec, Rng& rng);

// A moving shape whose trajectory encodes the label; fill color encodes
// fg_cue, background texture encodes bg_cue; exact binary mask attached.
// The trajectory depends only on (label, rng), never on the cues.
VideoClip render_clip(int label, const CueAssignment& cues, const BiasSpec& spec, Rng& rng);

// Per-frame mask centroids in pixel coordinates (row, col); used to verify
// trajectory invariance under cue permutation.
std::vector<std::pair<double, double>> mask_centroids(const VideoClip& clip);

struct ManifestRow {
    std::string id;
    std::string split;
    int label = 0;
    int bg_cue = 0;
    int fg_cue = 0;
    uint64_t seed = 0;
    std::string path;  // relative to dataset root
};

std::string manifest_row_to_json(const ManifestRow& row);
ManifestRow manifest_row_from_json(const std::string& line);

std::vector<ManifestRow> load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const std::filesystem::path& manifest_path, const std::vector<ManifestRow>& rows);

// Generates n_per_class clips per class under <root>/<split>/<id>.clip and
// writes <root>/<split>/manifest.jsonl. The ood_test split forces both rho
// values to chance so cues are decorrelated from labels.
std::vector<ManifestRow> build_split(const BiasSpec& spec, int n_per_class,
                                     const std::string& split,
                                     const std::filesystem::path& root);

// Dataset-level metadata (<root>/meta.json): spec, class names, flip map.
void write_dataset_meta(const std::filesystem::path& root, const BiasSpec& spec);
struct DatasetMeta {
    BiasSpec spec;
    std::vector<std::string> classes;
    std::vector<int> flip_map;
};
DatasetMeta load_dataset_meta(const std::filesystem::path& root);

}  // namespace vidbias
