#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vidbias {

// H x W x C image, values in [0,1], row-major with channel fastest.
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, 0.f) {}

    float& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
};

// T x H x W x C frame stack in [0,1] with an optional per-frame binary
// foreground mask (1 = foreground).
struct VideoClip {
    int t = 0, h = 0, w = 0, c = 0;
    int label = -1;
    std::vector<float> frames;  // t*h*w*c
    std::vector<float> mask;    // t*h*w, empty when absent

    VideoClip() = default;
    VideoClip(int t_, int h_, int w_, int c_, int label_ = -1)
        : t(t_), h(h_), w(w_), c(c_), label(label_),
          frames(static_cast<size_t>(t_) * h_ * w_ * c_, 0.f) {}

    bool has_mask() const { return !mask.empty(); }
    void alloc_mask() { mask.assign(static_cast<size_t>(t) * h * w, 0.f); }

    size_t pixel_index(int ti, int y, int x) const {
        return (static_cast<size_t>(ti) * h + y) * w + x;
    }
    float& at(int ti, int y, int x, int ch) { return frames[pixel_index(ti, y, x) * c + ch]; }
    float at(int ti, int y, int x, int ch) const { return frames[pixel_index(ti, y, x) * c + ch]; }
    float& mask_at(int ti, int y, int x) { return mask[pixel_index(ti, y, x)]; }
    float mask_at(int ti, int y, int x) const { return mask[pixel_index(ti, y, x)]; }
};

// Mean absolute inter-frame pixel difference; 0 iff all frames are equal.
double motion_energy(const VideoClip& clip);

// out = mask * fg + (1 - mask) * bg, per frame. Binary masks make this an
// exact pixel selection, so composites round-trip bit-exactly.
VideoClip composite_over_background(const VideoClip& fg, const Image& bg);

// Clip file: 8 x int32 LE header {magic, version, T, H, W, C, label, flags},
// then float32 LE frames, then float32 LE mask when flags bit 0 is set.
inline constexpr int32_t kClipMagic = 0x56434c50;  // "VCLP"
inline constexpr int32_t kClipVersion = 1;

void save_clip(const std::filesystem::path& path, const VideoClip& clip);
VideoClip load_clip(const std::filesystem::path& path, bool want_mask = true);

}  // namespace vidbias
