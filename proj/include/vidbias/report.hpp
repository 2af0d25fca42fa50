#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vidbias {

uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t hash_file(const std::filesystem::path& path);
// Order-independent-of-traversal content hash: files visited in sorted
// relative-path order, path string and bytes folded in.
uint64_t hash_tree(const std::filesystem::path& root);
std::string hex64(uint64_t v);

// run_meta.json: resolved config, seed, content hashes, code version.
void write_run_meta(const std::filesystem::path& dir, const nlohmann::json& resolved_config,
                    const nlohmann::json& extra);

struct Series {
    std::string name;
    std::vector<double> x, y;
};

// Deterministic text-only SVG charts (fixed float formatting, no metadata).
void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::vector<Series>& series, const std::string& x_label,
                          const std::string& y_label);
void write_bar_chart_svg(const std::filesystem::path& path, const std::string& title,
                         const std::vector<std::string>& labels, const std::vector<double>& values);

}  // namespace vidbias
