#include "vidbias/synthvid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vidbias {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
    float r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

Rgb fg_color(int fg_cue, int n_fg_cues) {
    return hsv_to_rgb((fg_cue + 0.5) / std::max(1, n_fg_cues), 0.85, 0.95);
}

// Continuous disc track: center and radius per frame.
struct Track {
    std::vector<double> cx, cy, rad;
};

enum MotionClass {
    kTranslateRight = 0,
    kTranslateLeft = 1,
    kTranslateUp = 2,
    kOrbitCw = 3,
    kOrbitCcw = 4,
    kZigzag = 5,
    kGrowShrink = 6,
    kBounce = 7,
};

Track sample_track(int label, int T, int H, int W, Rng& rng) {
    const double D = std::min(H, W);
    Track tr;
    tr.cx.resize(T);
    tr.cy.resize(T);
    tr.rad.resize(T);

    const double r = rng.uniform(0.14, 0.19) * D;
    const double m = r + 2.0;
    auto u_of = [T](int t) { return T > 1 ? static_cast<double>(t) / (T - 1) : 0.0; };

    switch (label) {
        case kTranslateRight:
        case kTranslateLeft: {
            const double y = rng.uniform(m, H - 1 - m);
            const double d = rng.uniform(0.45, 0.65) * (W - 1 - 2 * m);
            const double x0 = rng.uniform(m, W - 1 - m - d);
            for (int t = 0; t < T; ++t) {
                double x = x0 + d * u_of(t);
                if (label == kTranslateLeft) x = (W - 1) - x;
                tr.cx[t] = x;
                tr.cy[t] = y;
                tr.rad[t] = r;
            }
            break;
        }
        case kTranslateUp: {
            const double x = rng.uniform(m, W - 1 - m);
            const double d = rng.uniform(0.45, 0.65) * (H - 1 - 2 * m);
            const double y_top = rng.uniform(m, H - 1 - m - d);
            for (int t = 0; t < T; ++t) {
                tr.cx[t] = x;
                tr.cy[t] = y_top + d * (1.0 - u_of(t));
                tr.rad[t] = r;
            }
            break;
        }
        case kOrbitCw:
        case kOrbitCcw: {
            const double R = rng.uniform(0.15, 0.22) * D;
            const double cx = rng.uniform(m + R, W - 1 - m - R);
            const double cy = rng.uniform(m + R, H - 1 - m - R);
            const double phi0 = rng.uniform(0, 2 * kPi);
            const double sweep = rng.uniform(0.70, 0.95) * 2 * kPi;
            const double sign = (label == kOrbitCw) ? 1.0 : -1.0;
            for (int t = 0; t < T; ++t) {
                const double phi = phi0 + sign * sweep * u_of(t);
                tr.cx[t] = cx + R * std::cos(phi);
                tr.cy[t] = cy + R * std::sin(phi);
                tr.rad[t] = r;
            }
            break;
        }
        case kZigzag: {
            const double a = rng.uniform(0.08, 0.14) * W;
            const double xc = rng.uniform(m + a, W - 1 - m - a);
            const double d = rng.uniform(0.45, 0.60) * (H - 1 - 2 * m);
            const double y0 = rng.uniform(m, H - 1 - m - d);
            const double s = rng.bernoulli(0.5) ? 1.0 : -1.0;
            for (int t = 0; t < T; ++t) {
                tr.cx[t] = xc + s * a * std::sin(2 * kPi * 2.0 * u_of(t));
                tr.cy[t] = y0 + d * u_of(t);
                tr.rad[t] = r;
            }
            break;
        }
        case kGrowShrink: {
            const double rmax = rng.uniform(0.16, 0.22) * D;
            const double rmin = std::max(2.0, rng.uniform(0.40, 0.55) * rmax);
            const double m2 = rmax + 2.0;
            const double cx = rng.uniform(m2, W - 1 - m2);
            const double cy = rng.uniform(m2, H - 1 - m2);
            for (int t = 0; t < T; ++t) {
                tr.cx[t] = cx;
                tr.cy[t] = cy;
                tr.rad[t] = rmin + (rmax - rmin) * std::sin(kPi * u_of(t));
            }
            break;
        }
        case kBounce: {
            const double x = rng.uniform(m, W - 1 - m);
            const double amp = rng.uniform(0.35, 0.50) * (H - 1 - 2 * m);
            const double y_floor = rng.uniform(m + amp, H - 1 - m);
            for (int t = 0; t < T; ++t) {
                tr.cx[t] = x;
                tr.cy[t] = y_floor - amp * std::abs(std::sin(kPi * 2.0 * u_of(t)));
                tr.rad[t] = r;
            }
            break;
        }
        default:
            throw std::invalid_argument("sample_track: unknown label " + std::to_string(label));
    }
    return tr;
}

}  // namespace

int max_motion_classes() { return 8; }

std::vector<std::string> class_names(int n_classes) {
    static const std::vector<std::string> names = {
        "translate_right", "translate_left", "translate_up", "orbit_cw",
        "orbit_ccw",       "zigzag",         "grow_shrink",  "bounce"};
    return {names.begin(), names.begin() + n_classes};
}

std::vector<int> flip_label_map(int n_classes) {
    static const std::vector<int> full = {1, 0, 2, 4, 3, 5, 6, 7};
    std::vector<int> map(full.begin(), full.begin() + n_classes);
    // Partial class sets must stay closed under mirroring.
    for (int i = 0; i < n_classes; ++i)
        if (map[i] >= n_classes)
            throw std::invalid_argument("flip_label_map: class set not mirror-closed at n=" +
                                        std::to_string(n_classes));
    return map;
}

void BiasSpec::validate() const {
    if (n_classes < 2 || n_classes > max_motion_classes())
        throw std::invalid_argument("BiasSpec: n_classes must be in [2, " +
                                    std::to_string(max_motion_classes()) + "]");
    if (n_bg_cues < 2 || n_fg_cues < 2)
        throw std::invalid_argument("BiasSpec: cue vocabularies need at least 2 entries");
    const double lo_bg = 1.0 / n_bg_cues, lo_fg = 1.0 / n_fg_cues;
    if (rho_bg < lo_bg - 1e-12 || rho_bg > 1.0 + 1e-12)
        throw std::invalid_argument("BiasSpec: rho_bg outside [1/n_bg_cues, 1]");
    if (rho_fg < lo_fg - 1e-12 || rho_fg > 1.0 + 1e-12)
        throw std::invalid_argument("BiasSpec: rho_fg outside [1/n_fg_cues, 1]");
    if (clip_len < 2) throw std::invalid_argument("BiasSpec: clip_len must be >= 2");
    if (height < 32 || width < 32)
        throw std::invalid_argument("BiasSpec: resolution too small for trajectories (min 32)");
}

CueAssignment assign_cues(int label, const BiasSpec& spec, Rng& rng) {
    spec.validate();
    auto draw = [&](int n_cues, double rho, int designated) {
        if (rng.bernoulli(rho)) return designated;
        int idx = rng.uniform_int(n_cues - 1);
        return idx >= designated ? idx + 1 : idx;
    };
    CueAssignment out;
    const int des_bg = label % spec.n_bg_cues;
    const int des_fg = label % spec.n_fg_cues;
    out.bg_cue = draw(spec.n_bg_cues, spec.rho_bg, des_bg);
    out.fg_cue = draw(spec.n_fg_cues, spec.rho_fg, des_fg);
    out.aligned_bg = out.bg_cue == des_bg;
    out.aligned_fg = out.fg_cue == des_fg;
    return out;
}

Image cue_background(int bg_cue, const BiasSpec& spec) {
    Rng rng(derive_seed(spec.seed, "bgcue", static_cast<uint64_t>(bg_cue)));
    const double hue = static_cast<double>(bg_cue) / std::max(1, spec.n_bg_cues);
    const Rgb c1 = hsv_to_rgb(hue, 0.55, 0.40);
    const Rgb c2 = hsv_to_rgb(hue + 0.06, 0.65, 0.62);
    const double theta = rng.uniform(0, kPi);
    const double period = rng.uniform(10.0, 20.0);
    const double phase = rng.uniform(0, 2 * kPi);

    Image bg(spec.height, spec.width, 3);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const bool stripe = std::sin(2 * kPi * (x * ct + y * st) / period + phase) > 0;
            const Rgb& col = stripe ? c2 : c1;
            bg.at(y, x, 0) = col.r;
            bg.at(y, x, 1) = col.g;
            bg.at(y, x, 2) = col.b;
        }
    return bg;
}

ClipLayers render_layers(int label, const CueAssignment& cues, const BiasSpec& spec, Rng& rng) {
    spec.validate();
    if (label < 0 || label >= spec.n_classes)
        throw std::invalid_argument("render_layers: label out of range");

    const int T = spec.clip_len, H = spec.height, W = spec.width;
    ClipLayers out;
    out.background = cue_background(cues.bg_cue, spec);

    const Track tr = sample_track(label, T, H, W, rng);
    out.centroid_x = tr.cx;
    out.centroid_y = tr.cy;

    const Rgb fill = fg_color(cues.fg_cue, spec.n_fg_cues);
    VideoClip fg(T, H, W, 3, label);
    fg.alloc_mask();
    for (int t = 0; t < T; ++t) {
        const double cx = tr.cx[t], cy = tr.cy[t], r2 = tr.rad[t] * tr.rad[t];
        int nonempty = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                fg.at(t, y, x, 0) = fill.r;
                fg.at(t, y, x, 1) = fill.g;
                fg.at(t, y, x, 2) = fill.b;
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy <= r2) {
                    fg.mask_at(t, y, x) = 1.f;
                    ++nonempty;
                }
            }
        if (nonempty == 0)
            throw std::logic_error("render_layers: empty mask on frame " + std::to_string(t));
    }
    out.foreground = std::move(fg);
    return out;
}

VideoClip render_clip(int label, const CueAssignment& cues, const BiasSpec& spec, Rng& rng) {
    ClipLayers layers = render_layers(label, cues, spec, rng);
    return composite_over_background(layers.foreground, layers.background);
}

std::vector<std::pair<double, double>> mask_centroids(const VideoClip& clip) {
    if (!clip.has_mask()) throw std::invalid_argument("mask_centroids: clip has no mask");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<size_t>(clip.t));
    for (int t = 0; t < clip.t; ++t) {
        double sy = 0, sx = 0;
        int64_t n = 0;
        for (int y = 0; y < clip.h; ++y)
            for (int x = 0; x < clip.w; ++x)
                if (clip.mask_at(t, y, x) != 0.f) {
                    sy += y;
                    sx += x;
                    ++n;
                }
        if (n == 0) throw std::logic_error("mask_centroids: empty mask frame");
        out.emplace_back(sy / n, sx / n);
    }
    return out;
}

std::string manifest_row_to_json(const ManifestRow& row) {
    nlohmann::json j{{"id", row.id},         {"split", row.split}, {"label", row.label},
                     {"bg_cue", row.bg_cue}, {"fg_cue", row.fg_cue},
                     {"seed", row.seed},     {"path", row.path}};
    return j.dump();
}

ManifestRow manifest_row_from_json(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    ManifestRow row;
    row.id = j.at("id").get<std::string>();
    row.split = j.at("split").get<std::string>();
    row.label = j.at("label").get<int>();
    row.bg_cue = j.at("bg_cue").get<int>();
    row.fg_cue = j.at("fg_cue").get<int>();
    row.seed = j.at("seed").get<uint64_t>();
    row.path = j.at("path").get<std::string>();
    return row;
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + manifest_path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        rows.push_back(manifest_row_from_json(line));
    }
    return rows;
}

void save_manifest(const std::filesystem::path& manifest_path, const std::vector<ManifestRow>& rows) {
    const auto tmp = manifest_path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("save_manifest: cannot open " + tmp);
        for (const auto& row : rows) f << manifest_row_to_json(row) << '\n';
        if (!f) throw std::runtime_error("save_manifest: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, manifest_path);
}

std::vector<ManifestRow> build_split(const BiasSpec& spec, int n_per_class,
                                     const std::string& split,
                                     const std::filesystem::path& root) {
    spec.validate();
    if (n_per_class <= 0) throw std::invalid_argument("build_split: n_per_class must be positive");
    if (split != "train" && split != "val" && split != "iid_test" && split != "ood_test")
        throw std::invalid_argument("build_split: unknown split " + split);

    BiasSpec eff = spec;
    if (split == "ood_test") {
        eff.rho_bg = 1.0 / spec.n_bg_cues;
        eff.rho_fg = 1.0 / spec.n_fg_cues;
    }

    const auto dir = root / split;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("build_split: cannot create " + dir.string());

    const int total = spec.n_classes * n_per_class;
    std::vector<ManifestRow> rows(static_cast<size_t>(total));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int idx = 0; idx < total; ++idx) {
        const int label = idx / n_per_class;
        const uint64_t clip_seed = derive_seed(spec.seed, split, static_cast<uint64_t>(idx));
        Rng clip_rng(clip_seed);
        Rng cue_rng = clip_rng.child("cue");
        Rng traj_rng = clip_rng.child("traj");
        const CueAssignment cues = assign_cues(label, eff, cue_rng);
        VideoClip clip = render_clip(label, cues, spec, traj_rng);

        char idbuf[64];
        std::snprintf(idbuf, sizeof(idbuf), "%s-%05d", split.c_str(), idx);
        ManifestRow row;
        row.id = idbuf;
        row.split = split;
        row.label = label;
        row.bg_cue = cues.bg_cue;
        row.fg_cue = cues.fg_cue;
        row.seed = clip_seed;
        row.path = split + "/" + row.id + ".clip";
        save_clip(root / row.path, clip);
        rows[static_cast<size_t>(idx)] = std::move(row);
    }

    save_manifest(dir / "manifest.jsonl", rows);
    return rows;
}

void write_dataset_meta(const std::filesystem::path& root, const BiasSpec& spec) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["spec"] = spec;
    j["classes"] = class_names(spec.n_classes);
    j["flip_map"] = flip_label_map(spec.n_classes);
    std::ofstream f(root / "meta.json", std::ios::trunc);
    if (!f) throw std::runtime_error("write_dataset_meta: cannot open " + (root / "meta.json").string());
    f << j.dump(2) << '\n';
}

DatasetMeta load_dataset_meta(const std::filesystem::path& root) {
    std::ifstream f(root / "meta.json");
    if (!f) throw std::runtime_error("load_dataset_meta: cannot open " + (root / "meta.json").string());
    nlohmann::json j;
    f >> j;
    DatasetMeta meta;
    meta.spec = j.at("spec").get<BiasSpec>();
    meta.classes = j.at("classes").get<std::vector<std::string>>();
    meta.flip_map = j.at("flip_map").get<std::vector<int>>();
    return meta;
}

}  // namespace vidbias
