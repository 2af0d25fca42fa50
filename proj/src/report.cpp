#include "vidbias/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vidbias/config.hpp"

namespace vidbias {

uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("hash_file: cannot open " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a_bytes(buf, static_cast<size_t>(f.gcount()), h);
    }
    return h;
}

uint64_t hash_tree(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::vector<std::string> rels;
    rels.reserve(files.size());
    for (const auto& p : files) rels.push_back(std::filesystem::relative(p, root).generic_string());
    std::sort(rels.begin(), rels.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& rel : rels) {
        h = fnv1a_bytes(rel.data(), rel.size(), h);
        const uint64_t fh = hash_file(root / rel);
        h = fnv1a_bytes(&fh, sizeof(fh), h);
    }
    return h;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_run_meta(const std::filesystem::path& dir, const nlohmann::json& resolved_config,
                    const nlohmann::json& extra) {
    nlohmann::json j;
    j["config"] = resolved_config;
    j["code_version"] = kCodeVersion;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream f(dir / "run_meta.json", std::ios::trunc);
    if (!f) throw DataError("write_run_meta: cannot open " + (dir / "run_meta.json").string());
    f << j.dump(2) << '\n';
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<Series>& series, const std::string& x_label,
                          const std::string& y_label) {
    if (series.empty()) throw DataError("write_line_chart_svg: no series");
    for (const auto& s : series)
        if (s.x.empty() || s.x.size() != s.y.size())
            throw DataError("write_line_chart_svg: empty or mismatched series " + s.name);

    double xmin = series[0].x[0], xmax = xmin, ymin = series[0].y[0], ymax = ymin;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" +
           xml_escape(title) + "</text>\n";
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(H - B) + "\" x2=\"" + fmt(W - R) + "\" y2=\"" +
           fmt(H - B) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(L) + "\" y2=\"" +
           fmt(H - B) + "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        svg += "<text x=\"" + fmt(L - 6) + "\" y=\"" + fmt(py(yv) + 4) +
               "\" text-anchor=\"end\" font-size=\"11\">" + fmt(yv) + "</text>\n";
        const double xv = xmin + (xmax - xmin) * k / 4.0;
        svg += "<text x=\"" + fmt(px(xv)) + "\" y=\"" + fmt(H - B + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(xv) + "</text>\n";
    }
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"" + fmt(H - 12) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + xml_escape(x_label) + "</text>\n";
    svg += "<text x=\"16\" y=\"" + fmt(H / 2) + "\" text-anchor=\"middle\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " + fmt(H / 2) + ")\">" + xml_escape(y_label) + "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 6];
        std::string pts;
        for (size_t i = 0; i < s.x.size(); ++i)
            pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        svg += "<text x=\"" + fmt(W - R - 4) + "\" y=\"" + fmt(T + 16 + 16 * static_cast<double>(si)) +
               "\" text-anchor=\"end\" font-size=\"12\" fill=\"" + color + "\">" +
               xml_escape(s.name) + "</text>\n";
    }
    svg += "</svg>\n";

    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw DataError("write_line_chart_svg: cannot open " + path.string());
    f << svg;
}

void write_bar_chart_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<std::string>& labels, const std::vector<double>& values) {
    if (labels.empty() || labels.size() != values.size())
        throw DataError("write_bar_chart_svg: empty or mismatched inputs");
    double vmax = 0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1;

    const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 70;
    const size_t n = labels.size();
    const double slot = (W - L - R) / static_cast<double>(n);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W) + "\" height=\"" + fmt(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + fmt(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" +
           xml_escape(title) + "</text>\n";
    for (size_t i = 0; i < n; ++i) {
        const double bh = values[i] / vmax * (H - T - B);
        const double x0 = L + slot * static_cast<double>(i) + slot * 0.15;
        svg += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(H - B - bh) + "\" width=\"" + fmt(slot * 0.7) +
               "\" height=\"" + fmt(bh) + "\" fill=\"" + kPalette[i % 6] + "\"/>\n";
        svg += "<text x=\"" + fmt(x0 + slot * 0.35) + "\" y=\"" + fmt(H - B - bh - 5) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(values[i]) + "</text>\n";
        svg += "<text x=\"" + fmt(x0 + slot * 0.35) + "\" y=\"" + fmt(H - B + 16) +
               "\" text-anchor=\"middle\" font-size=\"11\">" + xml_escape(labels[i]) + "</text>\n";
    }
    svg += "</svg>\n";

    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw DataError("write_bar_chart_svg: cannot open " + path.string());
    f << svg;
}

}  // namespace vidbias
