#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "vidbias/benchbuild.hpp"
#include "vidbias/synthvid.hpp"

using namespace vidbias;
namespace fs = std::filesystem;

namespace {

BiasSpec small_spec() {
    BiasSpec s;
    s.clip_len = 4;
    s.height = 32;
    s.width = 32;
    s.seed = 5;
    return s;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vidbias_bench_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

VideoClip sample_clip(int label = 2, uint64_t seed = 9) {
    Rng rng(seed);
    return render_clip(label, CueAssignment{1, 3, false, false}, small_spec(), rng);
}

}  // namespace

TEST_CASE("sinusoid background: degenerate frequency gives a constant blend") {
    SinusoidParams p;
    p.theta = 0.7;
    p.freq = 0.0;  // test hook
    p.phase = 1.1;
    p.c1 = {0.2f, 0.4f, 0.6f};
    p.c2 = {0.9f, 0.1f, 0.5f};
    const Image img = render_sinusoid(p, 16, 16);
    for (int ch = 0; ch < 3; ++ch) {
        const float v0 = img.at(0, 0, ch);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) REQUIRE(img.at(y, x, ch) == v0);
    }
}

TEST_CASE("sinusoid background: deterministic, bounded, centered mean") {
    const Image a = gen_sinusoid_background(99, 24, 24);
    const Image b = gen_sinusoid_background(99, 24, 24);
    CHECK(a.data == b.data);

    double mean = 0;
    int64_t n = 0;
    for (int s = 0; s < 1000; ++s) {
        const Image img = gen_sinusoid_background(1000 + static_cast<uint64_t>(s), 16, 16);
        for (const float v : img.data) {
            REQUIRE(v >= 0.f);
            REQUIRE(v <= 1.f);
            mean += v;
        }
        n += static_cast<int64_t>(img.data.size());
    }
    mean /= static_cast<double>(n);
    CHECK(mean > 0.35);
    CHECK(mean < 0.65);
}

TEST_CASE("texture and mosaic backgrounds are deterministic and in range") {
    for (const auto& fam : {"texture", "mosaic"}) {
        const Image a = gen_background(fam, 7, 32, 32);
        const Image b = gen_background(fam, 7, 32, 32);
        CHECK(a.data == b.data);
        for (const float v : a.data) {
            REQUIRE(v >= 0.f);
            REQUIRE(v <= 1.f);
        }
    }
    CHECK_THROWS_AS(gen_background("nope", 1, 32, 32), std::invalid_argument);
}

TEST_CASE("composite_scuba: identity and absorbing masks") {
    VideoClip clip = sample_clip();
    const Image bg = gen_sinusoid_background(3, clip.h, clip.w);

    VideoClip all_fg = clip;
    for (auto& v : all_fg.mask) v = 1.f;
    const VideoClip same = composite_scuba(all_fg, bg);
    CHECK(same.frames == all_fg.frames);

    VideoClip all_bg = clip;
    for (auto& v : all_bg.mask) v = 0.f;
    const VideoClip absorbed = composite_scuba(all_bg, bg);
    for (int t = 0; t < absorbed.t; ++t)
        for (int y = 0; y < absorbed.h; ++y)
            for (int x = 0; x < absorbed.w; ++x)
                for (int c = 0; c < 3; ++c)
                    REQUIRE(absorbed.at(t, y, x, c) == bg.at(y, x, c));
}

TEST_CASE("composite_scuba: exhaustive leakage check") {
    const VideoClip clip = sample_clip();
    const Image bg = gen_texture_background(17, clip.h, clip.w);
    const VideoClip scuba = composite_scuba(clip, bg);
    CHECK(scuba.label == clip.label);
    for (int t = 0; t < scuba.t; ++t)
        for (int y = 0; y < scuba.h; ++y)
            for (int x = 0; x < scuba.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    if (clip.mask_at(t, y, x) != 0.f)
                        REQUIRE(scuba.at(t, y, x, c) == clip.at(t, y, x, c));
                    else
                        REQUIRE(scuba.at(t, y, x, c) == bg.at(y, x, c));
                }
}

TEST_CASE("composite_scuba: shape mismatch and missing mask rejected") {
    VideoClip clip = sample_clip();
    const Image wrong = gen_sinusoid_background(3, clip.h / 2, clip.w);
    CHECK_THROWS_AS(composite_scuba(clip, wrong), std::invalid_argument);
    VideoClip no_mask = clip;
    no_mask.mask.clear();
    const Image bg = gen_sinusoid_background(3, clip.h, clip.w);
    CHECK_THROWS_AS(composite_scuba(no_mask, bg), std::invalid_argument);
}

TEST_CASE("make_scufo: motionless, exact frame copy, idempotent") {
    const VideoClip clip = sample_clip();
    const Image bg = gen_sinusoid_background(21, clip.h, clip.w);
    const VideoClip scuba = composite_scuba(clip, bg);

    const VideoClip scufo = make_scufo(scuba, 0);
    CHECK(motion_energy(scufo) == 0.0);
    CHECK(scufo.label == scuba.label);
    const size_t frame_sz = static_cast<size_t>(scuba.h) * scuba.w * scuba.c;
    for (int t = 0; t < scufo.t; ++t)
        for (size_t i = 0; i < frame_sz; ++i)
            REQUIRE(scufo.frames[t * frame_sz + i] == scuba.frames[i]);

    const VideoClip twice = make_scufo(scufo, 2);
    CHECK(twice.frames == scufo.frames);

    CHECK_THROWS_AS(make_scufo(scuba, -1), std::out_of_range);
    CHECK_THROWS_AS(make_scufo(scuba, scuba.t), std::out_of_range);
}

TEST_CASE("make_conflfg: empty donor mask is the identity") {
    const VideoClip clip = sample_clip();
    const Image bg = gen_sinusoid_background(33, clip.h, clip.w);
    const VideoClip host = composite_scuba(clip, bg);
    VideoClip donor = sample_clip(5, 77);
    for (auto& v : donor.mask) v = 0.f;  // forced empty
    Rng rng(4);
    bool overlapped = true;
    const VideoClip out = make_conflfg(host, donor, 1, rng, &overlapped);
    CHECK(out.frames == host.frames);
    CHECK_FALSE(overlapped);
}

TEST_CASE("make_conflfg: static paste, label preserved, motion confined") {
    const VideoClip clip = sample_clip(3, 13);
    const Image bg = gen_sinusoid_background(51, clip.h, clip.w);
    const VideoClip host = composite_scuba(clip, bg);
    const VideoClip donor = sample_clip(6, 99);
    Rng rng(8);
    bool overlapped = false;
    const VideoClip out = make_conflfg(host, donor, 2, rng, &overlapped);
    CHECK(out.label == host.label);

    // inter-frame differences vanish outside the host's foreground region:
    // the pasted donor content is static, so only host motion remains
    const size_t frame_sz = static_cast<size_t>(out.h) * out.w * out.c;
    for (int t = 1; t < out.t; ++t)
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x) {
                const bool host_fg = host.mask_at(t, y, x) != 0.f || host.mask_at(t - 1, y, x) != 0.f;
                if (host_fg) continue;
                for (int c = 0; c < 3; ++c) {
                    const size_t i = (static_cast<size_t>(y) * out.w + x) * out.c + c;
                    REQUIRE(out.frames[t * frame_sz + i] == out.frames[(t - 1) * frame_sz + i]);
                }
            }
}

TEST_CASE("build_benchmark: counts, referential integrity, determinism") {
    BiasSpec spec = small_spec();
    spec.clip_len = 4;
    const fs::path data = fresh_dir("bb_data");
    write_dataset_meta(data, spec);
    build_split(spec, 1, "iid_test", data);  // 8 source clips

    const fs::path out_a = fresh_dir("bb_out_a");
    const auto sum_a = build_benchmark(data, "iid_test", out_a, 2, 123);
    int n_scuba = 0, n_scufo = 0, n_confl = 0;
    std::set<std::string> scuba_ids;
    for (const auto& row : sum_a.rows) {
        if (row.kind == "scuba") {
            ++n_scuba;
            scuba_ids.insert(row.pair_id);
        } else if (row.kind == "scufo") {
            ++n_scufo;
        } else {
            ++n_confl;
        }
    }
    CHECK(n_scuba == 8 * 3 * 2);
    CHECK(n_scufo == 8 * 3 * 2);
    CHECK(n_confl == 8 * 2);  // sinusoid family only
    for (const auto& row : sum_a.rows)
        if (row.kind == "scufo") REQUIRE(scuba_ids.count(row.pair_id) == 1);

    // scufo frames equal the recorded scuba frame, and frame indices reproduce
    const fs::path out_b = fresh_dir("bb_out_b");
    const auto sum_b = build_benchmark(data, "iid_test", out_b, 2, 123);
    REQUIRE(sum_a.rows.size() == sum_b.rows.size());
    for (size_t i = 0; i < sum_a.rows.size(); ++i) {
        CHECK(sum_a.rows[i].pair_id == sum_b.rows[i].pair_id);
        CHECK(sum_a.rows[i].frame_index == sum_b.rows[i].frame_index);
    }

    for (const auto& row : sum_a.rows) {
        if (row.kind != "scufo") continue;
        const VideoClip scufo = load_clip(out_a / row.path);
        CHECK(motion_energy(scufo) == 0.0);
    }

    const auto manifest = load_bench_manifest(out_a / "manifest.jsonl");
    CHECK(manifest.size() == sum_a.rows.size());
    fs::remove_all(data);
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}
