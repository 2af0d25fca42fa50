#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vidbias/report.hpp"
#include "vidbias/synthvid.hpp"

using namespace vidbias;
namespace fs = std::filesystem;

namespace {

BiasSpec small_spec() {
    BiasSpec s;
    s.n_classes = 8;
    s.n_bg_cues = 8;
    s.n_fg_cues = 8;
    s.rho_bg = 0.95;
    s.rho_fg = 0.95;
    s.clip_len = 4;
    s.height = 32;
    s.width = 32;
    s.seed = 42;
    return s;
}

// chi-square statistic against a uniform distribution over k cells
double chi2_uniform(const std::vector<int>& counts) {
    int64_t n = 0;
    for (int c : counts) n += c;
    const double expect = static_cast<double>(n) / counts.size();
    double stat = 0;
    for (int c : counts) stat += (c - expect) * (c - expect) / expect;
    return stat;
}

// critical value at p = 0.01 for dof = 7
constexpr double kChi2Crit7_p01 = 18.4753;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vidbias_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("assign_cues: degenerate correlation pins the designated cue") {
    BiasSpec spec = small_spec();
    spec.rho_bg = 1.0;
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const auto cues = assign_cues(3, spec, rng);
        CHECK(cues.bg_cue == 3);
        CHECK(cues.aligned_bg);
    }
}

TEST_CASE("assign_cues: chance-level rho gives a uniform cue distribution") {
    BiasSpec spec = small_spec();
    spec.rho_bg = 1.0 / spec.n_bg_cues;
    spec.rho_fg = 1.0 / spec.n_fg_cues;
    Rng rng(11);
    std::vector<int> bg_counts(8, 0), fg_counts(8, 0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto cues = assign_cues(5, spec, rng);
        ++bg_counts[static_cast<size_t>(cues.bg_cue)];
        ++fg_counts[static_cast<size_t>(cues.fg_cue)];
    }
    CHECK(chi2_uniform(bg_counts) < kChi2Crit7_p01);
    CHECK(chi2_uniform(fg_counts) < kChi2Crit7_p01);
}

TEST_CASE("assign_cues: fixed seed reproduces the assignment sequence") {
    const BiasSpec spec = small_spec();
    Rng a(123), b(123);
    for (int i = 0; i < 50; ++i) {
        const auto ca = assign_cues(i % spec.n_classes, spec, a);
        const auto cb = assign_cues(i % spec.n_classes, spec, b);
        CHECK(ca.bg_cue == cb.bg_cue);
        CHECK(ca.fg_cue == cb.fg_cue);
    }
}

TEST_CASE("render_clip: deterministic and moving") {
    const BiasSpec spec = small_spec();
    for (int label = 0; label < spec.n_classes; ++label) {
        Rng r1(900 + label), r2(900 + label);
        CueAssignment cues{label, label, true, true};
        const VideoClip a = render_clip(label, cues, spec, r1);
        const VideoClip b = render_clip(label, cues, spec, r2);
        CHECK(a.frames == b.frames);
        CHECK(a.mask == b.mask);
        CHECK(motion_energy(a) > 0.0);
        // mask nonempty on every frame
        for (int t = 0; t < a.t; ++t) {
            int count = 0;
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x)
                    if (a.mask_at(t, y, x) != 0.f) ++count;
            CHECK(count > 0);
        }
    }
}

TEST_CASE("render_clip: trajectory does not depend on cues") {
    const BiasSpec spec = small_spec();
    for (int label = 0; label < spec.n_classes; ++label) {
        Rng r1(50 + label), r2(50 + label);
        const VideoClip a = render_clip(label, CueAssignment{1, 2, false, false}, spec, r1);
        const VideoClip b = render_clip(label, CueAssignment{6, 7, false, false}, spec, r2);
        const auto ca = mask_centroids(a);
        const auto cb = mask_centroids(b);
        REQUIRE(ca.size() == cb.size());
        for (size_t t = 0; t < ca.size(); ++t) {
            CHECK(std::abs(ca[t].first - cb[t].first) < 1e-6);
            CHECK(std::abs(ca[t].second - cb[t].second) < 1e-6);
        }
        CHECK(a.mask == b.mask);
    }
}

TEST_CASE("render_layers: composite reconstructs the clip bit-exactly") {
    const BiasSpec spec = small_spec();
    Rng r1(77), r2(77);
    const CueAssignment cues{2, 5, false, false};
    const ClipLayers layers = render_layers(3, cues, spec, r1);
    const VideoClip direct = render_clip(3, cues, spec, r2);
    const VideoClip recomposed = composite_over_background(layers.foreground, layers.background);
    CHECK(recomposed.frames == direct.frames);
    CHECK(recomposed.mask == direct.mask);
    // outside the mask the frame equals the background exactly
    for (int t = 0; t < direct.t; ++t)
        for (int y = 0; y < direct.h; ++y)
            for (int x = 0; x < direct.w; ++x)
                if (direct.mask_at(t, y, x) == 0.f)
                    for (int c = 0; c < 3; ++c)
                        REQUIRE(direct.at(t, y, x, c) == layers.background.at(y, x, c));
}

TEST_CASE("motion_energy: definition cases") {
    VideoClip same(3, 4, 4, 3);
    for (auto& v : same.frames) v = 0.25f;
    CHECK(motion_energy(same) == 0.0);

    VideoClip two(2, 4, 4, 3);
    const size_t frame_sz = 4 * 4 * 3;
    for (size_t i = frame_sz; i < two.frames.size(); ++i) two.frames[i] = 1.0f;
    CHECK(motion_energy(two) == doctest::Approx(1.0));

    VideoClip one(1, 4, 4, 3);
    CHECK_THROWS_AS(motion_energy(one), std::invalid_argument);
}

TEST_CASE("flip map is a mirror-closed involution") {
    const auto map = flip_label_map(8);
    for (int i = 0; i < 8; ++i) {
        CHECK(map[static_cast<size_t>(map[static_cast<size_t>(i)])] == i);
    }
    CHECK(map[0] == 1);  // translate_right <-> translate_left
    CHECK(map[3] == 4);  // orbit_cw <-> orbit_ccw
}

TEST_CASE("build_split: counting and manifest round-trip") {
    BiasSpec spec = small_spec();
    spec.clip_len = 2;
    const fs::path root = fresh_dir("split_count");
    const auto rows = build_split(spec, 10, "train", root);
    CHECK(rows.size() == 80);  // 8 classes x 10

    const auto loaded = load_manifest(root / "train" / "manifest.jsonl");
    REQUIRE(loaded.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(loaded[i].id == rows[i].id);
        CHECK(loaded[i].label == rows[i].label);
        CHECK(loaded[i].bg_cue == rows[i].bg_cue);
        CHECK(loaded[i].fg_cue == rows[i].fg_cue);
        CHECK(loaded[i].seed == rows[i].seed);
        CHECK(loaded[i].path == rows[i].path);
    }
    // stored clip round-trips
    const VideoClip c = load_clip(root / rows[0].path);
    CHECK(c.t == spec.clip_len);
    CHECK(c.label == rows[0].label);
    CHECK(c.has_mask());
    fs::remove_all(root);
}

TEST_CASE("build_split: ood split decorrelates cues from labels") {
    BiasSpec spec = small_spec();
    spec.clip_len = 2;
    const fs::path root = fresh_dir("split_ood");
    const auto rows = build_split(spec, 125, "ood_test", root);  // 1000 clips
    REQUIRE(rows.size() == 1000);

    // pooled over classes: cue distribution uniform at p > 0.01
    std::vector<int> bg_counts(8, 0), fg_counts(8, 0);
    for (const auto& row : rows) {
        ++bg_counts[static_cast<size_t>(row.bg_cue)];
        ++fg_counts[static_cast<size_t>(row.fg_cue)];
    }
    CHECK(chi2_uniform(bg_counts) < kChi2Crit7_p01);
    CHECK(chi2_uniform(fg_counts) < kChi2Crit7_p01);

    // per-class alignment rate near chance (within 3 sigma)
    for (int label = 0; label < spec.n_classes; ++label) {
        int aligned = 0, n = 0;
        for (const auto& row : rows)
            if (row.label == label) {
                ++n;
                if (row.bg_cue == label % spec.n_bg_cues) ++aligned;
            }
        const double p = 1.0 / spec.n_bg_cues;
        const double sigma = std::sqrt(p * (1 - p) * n);
        CHECK(std::abs(aligned - p * n) < 3 * sigma + 1e-9);
    }
    fs::remove_all(root);
}

TEST_CASE("build_split: identical (spec, seed) gives byte-identical datasets") {
    BiasSpec spec = small_spec();
    spec.clip_len = 2;
    const fs::path a = fresh_dir("split_det_a");
    const fs::path b = fresh_dir("split_det_b");
    build_split(spec, 3, "train", a);
    build_split(spec, 3, "train", b);
    CHECK(hash_tree(a) == hash_tree(b));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("spec validation rejects bad parameters") {
    BiasSpec spec = small_spec();
    spec.height = 16;  // too small for trajectories
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

    spec = small_spec();
    spec.rho_bg = 0.05;  // below 1/n_bg_cues
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

    spec = small_spec();
    spec.rho_fg = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

    spec = small_spec();
    spec.clip_len = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("dataset meta round-trips") {
    const BiasSpec spec = small_spec();
    const fs::path root = fresh_dir("meta");
    write_dataset_meta(root, spec);
    const DatasetMeta meta = load_dataset_meta(root);
    CHECK(meta.spec.n_classes == spec.n_classes);
    CHECK(meta.spec.rho_bg == spec.rho_bg);
    CHECK(meta.spec.seed == spec.seed);
    CHECK(meta.classes.size() == 8);
    CHECK(meta.flip_map == flip_label_map(8));
    fs::remove_all(root);
}

TEST_CASE("clip file i/o round-trips bit-exactly") {
    const BiasSpec spec = small_spec();
    Rng rng(31);
    const VideoClip clip = render_clip(4, CueAssignment{1, 1, false, false}, spec, rng);
    const fs::path root = fresh_dir("clipio");
    save_clip(root / "x.clip", clip);
    const VideoClip back = load_clip(root / "x.clip");
    CHECK(back.t == clip.t);
    CHECK(back.label == clip.label);
    CHECK(back.frames == clip.frames);
    CHECK(back.mask == clip.mask);
    const VideoClip nomask = load_clip(root / "x.clip", /*want_mask=*/false);
    CHECK_FALSE(nomask.has_mask());
    fs::remove_all(root);
}
