#include "vidbias/benchbuild.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vidbias {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

SinusoidParams sample_sinusoid_params(Rng& rng, int height, int width) {
    (void)height;
    SinusoidParams p;
    p.theta = rng.uniform(0, kPi);
    p.freq = rng.uniform(2.0 / width, 8.0 / width);
    p.phase = rng.uniform(0, 2 * kPi);
    for (int i = 0; i < 3; ++i) p.c1[i] = static_cast<float>(rng.u01());
    for (int i = 0; i < 3; ++i) p.c2[i] = static_cast<float>(rng.u01());
    return p;
}

Image render_sinusoid(const SinusoidParams& p, int height, int width) {
    Image img(height, width, 3);
    const double ct = std::cos(p.theta), st = std::sin(p.theta);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double t = (1.0 + std::sin(2 * kPi * p.freq * (x * ct + y * st) + p.phase)) / 2.0;
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = static_cast<float>(p.c1[ch] + (p.c2[ch] - p.c1[ch]) * t);
        }
    return img;
}

Image gen_sinusoid_background(uint64_t seed, int height, int width) {
    if (height < 8 || width < 8)
        throw std::invalid_argument("gen_sinusoid_background: resolution below 8x8");
    Rng rng(seed);
    return render_sinusoid(sample_sinusoid_params(rng, height, width), height, width);
}

Image gen_texture_background(uint64_t seed, int height, int width) {
    if (height < 8 || width < 8)
        throw std::invalid_argument("gen_texture_background: resolution below 8x8");
    Rng rng(seed);

    // value-noise lattice, bilinear interpolation, 3 octaves
    auto lattice_value = [](uint64_t s, int gx, int gy) {
        const uint64_t h = splitmix64(s ^ (static_cast<uint64_t>(gx) * 0x9e3779b1u) ^
                                      (static_cast<uint64_t>(gy) * 0x85ebca77u));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    const uint64_t noise_seed = splitmix64(seed ^ 0xabcdef);
    std::array<double, 3> cell{8.0, 4.0, 2.0};
    std::array<double, 3> amp{1.0, 0.5, 0.25};
    const double amp_sum = amp[0] + amp[1] + amp[2];

    std::array<float, 3> c1{}, c2{};
    for (int i = 0; i < 3; ++i) c1[i] = static_cast<float>(rng.u01());
    for (int i = 0; i < 3; ++i) c2[i] = static_cast<float>(rng.u01());

    Image img(height, width, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double n = 0;
            for (int o = 0; o < 3; ++o) {
                const double fx = x / cell[o], fy = y / cell[o];
                const int gx = static_cast<int>(std::floor(fx)), gy = static_cast<int>(std::floor(fy));
                const double tx = fx - gx, ty = fy - gy;
                const uint64_t so = splitmix64(noise_seed + static_cast<uint64_t>(o));
                const double v00 = lattice_value(so, gx, gy);
                const double v10 = lattice_value(so, gx + 1, gy);
                const double v01 = lattice_value(so, gx, gy + 1);
                const double v11 = lattice_value(so, gx + 1, gy + 1);
                const double vx0 = v00 + (v10 - v00) * tx;
                const double vx1 = v01 + (v11 - v01) * tx;
                n += amp[o] * (vx0 + (vx1 - vx0) * ty);
            }
            n /= amp_sum;
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = static_cast<float>(c1[ch] + (c2[ch] - c1[ch]) * n);
        }
    return img;
}

Image gen_mosaic_background(uint64_t seed, int height, int width) {
    if (height < 8 || width < 8)
        throw std::invalid_argument("gen_mosaic_background: resolution below 8x8");
    Rng rng(seed);
    Image img(height, width, 3);
    std::array<float, 3> base{};
    for (int i = 0; i < 3; ++i) base[i] = static_cast<float>(rng.u01());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = base[ch];

    const int n_polys = 12;
    for (int k = 0; k < n_polys; ++k) {
        std::array<float, 3> col{};
        for (int i = 0; i < 3; ++i) col[i] = static_cast<float>(rng.u01());
        // random triangle
        double ax = rng.uniform(0, width), ay = rng.uniform(0, height);
        double bx = ax + rng.uniform(-0.7, 0.7) * width, by = ay + rng.uniform(-0.7, 0.7) * height;
        double cx = ax + rng.uniform(-0.7, 0.7) * width, cy = ay + rng.uniform(-0.7, 0.7) * height;
        auto edge = [](double x0, double y0, double x1, double y1, double px, double py) {
            return (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0);
        };
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double e0 = edge(ax, ay, bx, by, x, y);
                const double e1 = edge(bx, by, cx, cy, x, y);
                const double e2 = edge(cx, cy, ax, ay, x, y);
                const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
                if (inside)
                    for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = col[ch];
            }
    }
    return img;
}

Image gen_background(const std::string& family, uint64_t seed, int height, int width) {
    if (family == "sinusoid") return gen_sinusoid_background(seed, height, width);
    if (family == "texture") return gen_texture_background(seed, height, width);
    if (family == "mosaic") return gen_mosaic_background(seed, height, width);
    throw std::invalid_argument("gen_background: unknown family " + family);
}

VideoClip composite_scuba(const VideoClip& clip, const Image& background) {
    return composite_over_background(clip, background);
}

VideoClip make_scufo(const VideoClip& scuba, int frame_index) {
    if (frame_index < 0 || frame_index >= scuba.t)
        throw std::out_of_range("make_scufo: frame index " + std::to_string(frame_index) +
                                " outside [0, " + std::to_string(scuba.t) + ")");
    VideoClip out(scuba.t, scuba.h, scuba.w, scuba.c, scuba.label);
    const size_t frame_sz = static_cast<size_t>(scuba.h) * scuba.w * scuba.c;
    const float* src = scuba.frames.data() + frame_index * frame_sz;
    for (int t = 0; t < out.t; ++t)
        std::memcpy(out.frames.data() + t * frame_sz, src, frame_sz * sizeof(float));
    if (scuba.has_mask()) {
        out.alloc_mask();
        const size_t mask_sz = static_cast<size_t>(scuba.h) * scuba.w;
        const float* msrc = scuba.mask.data() + frame_index * mask_sz;
        for (int t = 0; t < out.t; ++t)
            std::memcpy(out.mask.data() + t * mask_sz, msrc, mask_sz * sizeof(float));
    }
    return out;
}

VideoClip make_conflfg(const VideoClip& host, const VideoClip& donor, int donor_frame,
                       Rng& rng, bool* overlapped) {
    if (!donor.has_mask()) throw std::invalid_argument("make_conflfg: donor has no mask");
    if (donor.h != host.h || donor.w != host.w || donor.c != host.c)
        throw std::invalid_argument("make_conflfg: resolution mismatch");
    if (donor_frame < 0 || donor_frame >= donor.t)
        throw std::out_of_range("make_conflfg: donor frame out of range");

    const int H = host.h, W = host.w;

    // Union of the host's foreground over time; the paste should avoid it.
    std::vector<char> host_union(static_cast<size_t>(H) * W, 0);
    if (host.has_mask())
        for (int t = 0; t < host.t; ++t)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    if (host.mask_at(t, y, x) != 0.f) host_union[static_cast<size_t>(y) * W + x] = 1;

    // Donor foreground bounding box at donor_frame.
    int y0 = H, y1 = -1, x0 = W, x1 = -1;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (donor.mask_at(donor_frame, y, x) != 0.f) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }

    VideoClip out = host;
    if (y1 < 0) {  // empty donor mask: nothing to paste
        if (overlapped) *overlapped = false;
        return out;
    }

    auto count_overlap = [&](int dy, int dx) {
        int n = 0;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if (donor.mask_at(donor_frame, y, x) != 0.f &&
                    host_union[static_cast<size_t>(y + dy) * W + (x + dx)])
                    ++n;
        return n;
    };

    int best_dy = 0, best_dx = 0, best_overlap = -1;
    const int tries = 40;
    for (int k = 0; k < tries; ++k) {
        const int dy = rng.uniform_int(H - (y1 - y0 + 1) + 1) - y0;
        const int dx = rng.uniform_int(W - (x1 - x0 + 1) + 1) - x0;
        const int ov = count_overlap(dy, dx);
        if (best_overlap < 0 || ov < best_overlap) {
            best_overlap = ov;
            best_dy = dy;
            best_dx = dx;
        }
        if (ov == 0) break;
    }
    if (overlapped) *overlapped = best_overlap > 0;

    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            if (donor.mask_at(donor_frame, y, x) == 0.f) continue;
            const int py = y + best_dy, px = x + best_dx;
            for (int t = 0; t < out.t; ++t)
                for (int ch = 0; ch < out.c; ++ch)
                    out.at(t, py, px, ch) = donor.at(donor_frame, y, x, ch);
        }
    return out;
}

std::string bench_row_to_json(const BenchRow& row) {
    nlohmann::json j{{"pair_id", row.pair_id}, {"source_id", row.source_id},
                     {"family", row.family},   {"kind", row.kind},
                     {"frame_index", row.frame_index}, {"label", row.label},
                     {"path", row.path},       {"bg_seed", row.bg_seed}};
    return j.dump();
}

BenchRow bench_row_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    BenchRow row;
    row.pair_id = j.at("pair_id").get<std::string>();
    row.source_id = j.at("source_id").get<std::string>();
    row.family = j.at("family").get<std::string>();
    row.kind = j.at("kind").get<std::string>();
    row.frame_index = j.at("frame_index").get<int>();
    row.label = j.at("label").get<int>();
    row.path = j.at("path").get<std::string>();
    row.bg_seed = j.value("bg_seed", uint64_t{0});
    return row;
}

std::vector<BenchRow> load_bench_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_bench_manifest: cannot open " + path.string());
    std::vector<BenchRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        rows.push_back(bench_row_from_json(line));
    }
    return rows;
}

BenchmarkSummary build_benchmark(const std::filesystem::path& data_root,
                                 const std::string& split,
                                 const std::filesystem::path& out_root,
                                 int k_backgrounds, uint64_t seed) {
    if (k_backgrounds <= 0) throw std::invalid_argument("build_benchmark: k must be positive");
    const auto src_rows = load_manifest(data_root / split / "manifest.jsonl");
    if (src_rows.empty()) throw std::runtime_error("build_benchmark: empty source manifest");

    for (const auto& kind : {"scuba", "scufo", "conflfg"}) {
        std::error_code ec;
        std::filesystem::create_directories(out_root / kind, ec);
        if (ec) throw std::runtime_error("build_benchmark: cannot create " + (out_root / kind).string());
    }

    BenchmarkSummary summary;
    std::vector<char> usable(src_rows.size(), 0);
    std::vector<VideoClip> sources(src_rows.size());
    for (size_t i = 0; i < src_rows.size(); ++i) {
        sources[i] = load_clip(data_root / src_rows[i].path);
        if (!sources[i].has_mask()) {
            std::cerr << "build_benchmark: skipping " << src_rows[i].id << " (no mask)\n";
            summary.skipped_sources.push_back(src_rows[i].id);
        } else {
            usable[i] = 1;
        }
    }

    std::vector<size_t> src_idx;
    for (size_t i = 0; i < src_rows.size(); ++i)
        if (usable[i]) src_idx.push_back(i);
    if (src_idx.empty()) throw std::runtime_error("build_benchmark: no usable source clips");

    const int n_fam = static_cast<int>(kBgFamilies.size());
    const int per_src = n_fam * k_backgrounds;
    const int n_pairs = static_cast<int>(src_idx.size()) * per_src;

    // rows: 2 per pair (scuba, scufo) + one conflfg per sinusoid-family pair
    std::vector<BenchRow> pair_rows(static_cast<size_t>(n_pairs) * 2);
    std::vector<BenchRow> confl_rows(static_cast<size_t>(src_idx.size()) * k_backgrounds);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int p = 0; p < n_pairs; ++p) {
        const size_t si = src_idx[static_cast<size_t>(p / per_src)];
        const int rem = p % per_src;
        const int fam_i = rem / k_backgrounds;
        const int k = rem % k_backgrounds;
        const auto& fam = kBgFamilies[static_cast<size_t>(fam_i)];
        const auto& src_row = src_rows[si];
        const VideoClip& src = sources[si];

        Rng pair_rng(derive_seed(seed, "bench:" + src_row.id + ":" + fam, static_cast<uint64_t>(k)));
        const uint64_t bg_seed = derive_seed(pair_rng.seed(), "bg", 0);
        const Image bg = gen_background(fam, bg_seed, src.h, src.w);
        VideoClip scuba = composite_scuba(src, bg);
        const int scufo_frame = pair_rng.uniform_int(src.t);
        VideoClip scufo = make_scufo(scuba, scufo_frame);

        const std::string pair_id = src_row.id + "-" + fam + "-" + std::to_string(k);
        BenchRow srow{pair_id, src_row.id, fam, "scuba", scufo_frame, src.label,
                      "scuba/" + pair_id + ".clip", bg_seed};
        BenchRow frow{pair_id, src_row.id, fam, "scufo", scufo_frame, src.label,
                      "scufo/" + pair_id + ".clip", bg_seed};
        save_clip(out_root / srow.path, scuba);
        save_clip(out_root / frow.path, scufo);
        pair_rows[static_cast<size_t>(p) * 2] = std::move(srow);
        pair_rows[static_cast<size_t>(p) * 2 + 1] = std::move(frow);

        // Confl-FG over the sinusoid family: paste a random other clip's
        // static foreground onto the sinusoid SCUBA clip.
        if (fam == "sinusoid") {
            Rng confl_rng = pair_rng.child("conflfg");
            size_t donor_i = si;
            if (src_idx.size() > 1) {
                size_t j = static_cast<size_t>(confl_rng.uniform_int(static_cast<int>(src_idx.size())));
                if (src_idx[j] == si) j = (j + 1) % src_idx.size();
                donor_i = src_idx[j];
            }
            const VideoClip& donor = sources[donor_i];
            const int donor_frame = confl_rng.uniform_int(donor.t);
            bool overlapped = false;
            VideoClip confl = make_conflfg(scuba, donor, donor_frame, confl_rng, &overlapped);
            const std::string cid = pair_id + "-cf";
            BenchRow crow{cid, src_row.id, fam, "conflfg", donor_frame, src.label,
                          "conflfg/" + cid + ".clip", bg_seed};
            save_clip(out_root / crow.path, confl);
            const int confl_slot = static_cast<int>(p / per_src) * k_backgrounds + k;
            confl_rows[static_cast<size_t>(confl_slot)] = std::move(crow);
        }
    }

    summary.rows.reserve(pair_rows.size() + confl_rows.size());
    for (auto& r : pair_rows) summary.rows.push_back(std::move(r));
    for (auto& r : confl_rows) summary.rows.push_back(std::move(r));

    const auto manifest_path = out_root / "manifest.jsonl";
    const auto tmp = manifest_path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("build_benchmark: cannot open " + tmp);
        for (const auto& row : summary.rows) f << bench_row_to_json(row) << '\n';
        if (!f) throw std::runtime_error("build_benchmark: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, manifest_path);
    return summary;
}

}  // namespace vidbias
