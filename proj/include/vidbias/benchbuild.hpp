#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "vidbias/clip.hpp"
#include "vidbias/rng.hpp"
#include "vidbias/synthvid.hpp"

namespace vidbias {

// The three out-of-distribution background families. Sinusoid follows the
// stated sinusoidal-stripe construction; the other two are procedural
// stand-ins with visually distinct statistics.
inline const std::array<std::string, 3> kBgFamilies = {"sinusoid", "texture", "mosaic"};

struct SinusoidParams {
    double theta = 0;      // stripe orientation, [0, pi)
    double freq = 0;       // cycles per pixel along theta
    double phase = 0;      // [0, 2*pi)
    std::array<float, 3> c1{}, c2{};
};

SinusoidParams sample_sinusoid_params(Rng& rng, int height, int width);
Image render_sinusoid(const SinusoidParams& params, int height, int width);

// pixel(x,y) = blend(c1, c2, (1 + sin(2*pi*f*(x*cos t + y*sin t) + phi)) / 2)
Image gen_sinusoid_background(uint64_t seed, int height, int width);

// Multi-octave value noise blended between two random colors.
Image gen_texture_background(uint64_t seed, int height, int width);

// Random filled polygons over a base color.
Image gen_mosaic_background(uint64_t seed, int height, int width);

Image gen_background(const std::string& family, uint64_t seed, int height, int width);

// Replace everything outside the clip's mask with a static background image.
// Inside-mask pixels are copied bit-exactly from the source clip.
VideoClip composite_scuba(const VideoClip& clip, const Image& background);

// Stack frame `frame_index` of a SCUBA clip T times; motionless by construction.
VideoClip make_scufo(const VideoClip& scuba, int frame_index);

// Paste the donor's foreground at `donor_frame` (static, via its mask) onto
// every frame of the host, at a location that avoids the host's foreground
// when feasible. Host label is preserved. Returns whether overlap with the
// host foreground could not be avoided.
VideoClip make_conflfg(const VideoClip& host, const VideoClip& donor, int donor_frame,
                       Rng& rng, bool* overlapped = nullptr);

struct BenchRow {
    std::string pair_id;
    std::string source_id;
    std::string family;
    std::string kind;  // scuba | scufo | conflfg
    int frame_index = 0;
    int label = 0;
    std::string path;     // relative to benchmark root
    uint64_t bg_seed = 0;  // provenance: regenerates the replacement background
};

std::string bench_row_to_json(const BenchRow& row);
BenchRow bench_row_from_json(const std::string& line);
std::vector<BenchRow> load_bench_manifest(const std::filesystem::path& path);

struct BenchmarkSummary {
    std::vector<BenchRow> rows;
    std::vector<std::string> skipped_sources;  // test clips without masks
};

// For every test clip and background family, k_backgrounds SCUBA clips, each
// with exactly one paired SCUFO clip (frame index recorded); a Confl-FG set
// is built over the sinusoid family. Pure function of (manifest, seed).
BenchmarkSummary build_benchmark(const std::filesystem::path& data_root,
                                 const std::string& split,
                                 const std::filesystem::path& out_root,
                                 int k_backgrounds, uint64_t seed);

}  // namespace vidbias
