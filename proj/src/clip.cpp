#include "vidbias/clip.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vidbias {

double motion_energy(const VideoClip& clip) {
    if (clip.t < 2) throw std::invalid_argument("motion_energy: need at least 2 frames");
    const size_t frame_sz = static_cast<size_t>(clip.h) * clip.w * clip.c;
    double acc = 0.0;
    for (int ti = 1; ti < clip.t; ++ti) {
        const float* prev = clip.frames.data() + (ti - 1) * frame_sz;
        const float* cur = clip.frames.data() + ti * frame_sz;
        for (size_t i = 0; i < frame_sz; ++i) acc += std::abs(static_cast<double>(cur[i]) - prev[i]);
    }
    return acc / (static_cast<double>(clip.t - 1) * frame_sz);
}

VideoClip composite_over_background(const VideoClip& fg, const Image& bg) {
    if (!fg.has_mask()) throw std::invalid_argument("composite: clip has no mask");
    if (bg.h != fg.h || bg.w != fg.w || bg.c != fg.c)
        throw std::invalid_argument("composite: background shape mismatch");
    VideoClip out(fg.t, fg.h, fg.w, fg.c, fg.label);
    out.mask = fg.mask;
    for (int ti = 0; ti < fg.t; ++ti)
        for (int y = 0; y < fg.h; ++y)
            for (int x = 0; x < fg.w; ++x) {
                const bool inside = fg.mask_at(ti, y, x) != 0.f;
                for (int ch = 0; ch < fg.c; ++ch)
                    out.at(ti, y, x, ch) = inside ? fg.at(ti, y, x, ch) : bg.at(y, x, ch);
            }
    return out;
}

void save_clip(const std::filesystem::path& path, const VideoClip& clip) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_clip: cannot open " + path.string());
    const int32_t flags = clip.has_mask() ? 1 : 0;
    const std::array<int32_t, 8> header{kClipMagic, kClipVersion, clip.t, clip.h,
                                        clip.w, clip.c, clip.label, flags};
    f.write(reinterpret_cast<const char*>(header.data()), sizeof(header));
    f.write(reinterpret_cast<const char*>(clip.frames.data()),
            static_cast<std::streamsize>(clip.frames.size() * sizeof(float)));
    if (flags & 1)
        f.write(reinterpret_cast<const char*>(clip.mask.data()),
                static_cast<std::streamsize>(clip.mask.size() * sizeof(float)));
    if (!f) throw std::runtime_error("save_clip: write failed for " + path.string());
}

VideoClip load_clip(const std::filesystem::path& path, bool want_mask) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_clip: cannot open " + path.string());
    std::array<int32_t, 8> header{};
    f.read(reinterpret_cast<char*>(header.data()), sizeof(header));
    if (!f || header[0] != kClipMagic)
        throw std::runtime_error("load_clip: bad magic in " + path.string());
    if (header[1] != kClipVersion)
        throw std::runtime_error("load_clip: unsupported version in " + path.string());
    VideoClip clip(header[2], header[3], header[4], header[5], header[6]);
    f.read(reinterpret_cast<char*>(clip.frames.data()),
           static_cast<std::streamsize>(clip.frames.size() * sizeof(float)));
    if ((header[7] & 1) && want_mask) {
        clip.alloc_mask();
        f.read(reinterpret_cast<char*>(clip.mask.data()),
               static_cast<std::streamsize>(clip.mask.size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("load_clip: truncated file " + path.string());
    return clip;
}

}  // namespace vidbias
