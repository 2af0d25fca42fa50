#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vidbias/autodiff.hpp"
#include "vidbias/clip.hpp"
#include "vidbias/conv3d.hpp"
#include "vidbias/rng.hpp"

namespace vidbias {

// Spatio-temporal classifier: stages of (3x3x3 conv, group norm, gelu) with
// strided downsampling, global average pooling and a linear head. Smooth
// activations keep the input-gradient norm differentiable in the parameters.
struct EncoderConfig {
    std::vector<int> channels{6, 8, 12, 16};
    std::vector<std::array<int, 3>> strides{{2, 2, 2}, {2, 2, 2}, {2, 2, 2}, {2, 2, 2}};
    int norm_groups = 2;
    int n_classes = 8;
    int clip_t = 8, clip_h = 64, clip_w = 64, clip_c = 3;
    uint64_t init_seed = 1;

    void validate() const {
        if (channels.empty() || channels.size() != strides.size())
            throw std::invalid_argument("EncoderConfig: channels/strides size mismatch");
        for (int c : channels)
            if (c <= 0 || c % norm_groups != 0)
                throw std::invalid_argument("EncoderConfig: channels must be positive multiples of norm_groups");
        if (n_classes < 2) throw std::invalid_argument("EncoderConfig: n_classes must be >= 2");
    }
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = nlohmann::json{{"channels", c.channels}, {"strides", c.strides},
                       {"norm_groups", c.norm_groups}, {"n_classes", c.n_classes},
                       {"clip_t", c.clip_t}, {"clip_h", c.clip_h},
                       {"clip_w", c.clip_w}, {"clip_c", c.clip_c},
                       {"init_seed", c.init_seed}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    j.at("channels").get_to(c.channels);
    j.at("strides").get_to(c.strides);
    j.at("norm_groups").get_to(c.norm_groups);
    j.at("n_classes").get_to(c.n_classes);
    j.at("clip_t").get_to(c.clip_t);
    j.at("clip_h").get_to(c.clip_h);
    j.at("clip_w").get_to(c.clip_w);
    j.at("clip_c").get_to(c.clip_c);
    j.at("init_seed").get_to(c.init_seed);
}

// Group normalization over [C, T, H, W]: per-group moments across channel
// and spatio-temporal extent, then a per-channel affine.
template <class S>
ad::Var<S> group_norm(const ad::Var<S>& x, const ad::Var<S>& gamma, const ad::Var<S>& beta,
                      int groups, double eps = 1e-5) {
    using namespace ad;
    const int c = x.value().dim(0);
    const int m = static_cast<int>(x.value().numel()) / c;
    const int per = (c / groups) * m;

    Var<S> xg = reshape(x, {groups, per});
    Var<S> mu = scale(row_sum(xg), static_cast<S>(1.0 / per));
    Var<S> centered = sub(xg, spread_rows(mu, per));
    Var<S> var = scale(row_sum(mul(centered, centered)), static_cast<S>(1.0 / per));
    Var<S> inv = pow_const(add_const(var, static_cast<S>(eps)), -0.5);
    Var<S> normed = mul(centered, spread_rows(inv, per));

    Var<S> nc = reshape(normed, {c, m});
    Var<S> y = add(mul(nc, spread_rows(gamma, m)), spread_rows(beta, m));
    return reshape(y, x.shape());
}

template <class S>
class Encoder {
public:
    explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg) { init(); }

    const EncoderConfig& config() const { return cfg_; }

    // x: [C, T, H, W]. Globally pooled features [channels.back()].
    ad::Var<S> features(const ad::Var<S>& x) const {
        using namespace ad;
        if (x.shape() != std::vector<int>{cfg_.clip_c, cfg_.clip_t, cfg_.clip_h, cfg_.clip_w})
            throw std::invalid_argument("Encoder::forward: input shape " + shape_str(x.shape()) +
                                        " does not match config");
        // map [0,1] pixels to [-1,1]
        Var<S> h = add_const(scale(x, static_cast<S>(2)), static_cast<S>(-1));
        const int n_stages = static_cast<int>(cfg_.channels.size());
        for (int s = 0; s < n_stages; ++s) {
            const ConvSpec cs{cfg_.strides[static_cast<size_t>(s)], {1, 1, 1}};
            h = conv3d(h, p(4 * s), cs);
            const int c = h.value().dim(0);
            const int m = static_cast<int>(h.value().numel()) / c;
            h = reshape(add(reshape(h, {c, m}), spread_rows(p(4 * s + 1), m)), h.shape());
            h = group_norm(h, p(4 * s + 2), p(4 * s + 3), cfg_.norm_groups);
            h = gelu(h);
        }
        const int c = h.value().dim(0);
        const int m = static_cast<int>(h.value().numel()) / c;
        return scale(row_sum(reshape(h, {c, m})), static_cast<S>(1.0 / m));
    }

    // Returns logits [n_classes].
    ad::Var<S> forward(const ad::Var<S>& x) const {
        using namespace ad;
        const int n_stages = static_cast<int>(cfg_.channels.size());
        return add(matvec(p(4 * n_stages), features(x)), p(4 * n_stages + 1));
    }

    std::vector<ad::Var<S>>& params() { return params_; }
    const std::vector<ad::Var<S>>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& v : params_) n += v.value().numel();
        return n;
    }

    // Replaces parameter values in place (graphs built afterwards see the
    // new values; previously built graphs must not be reused).
    void set_param_values(const std::vector<Tensor<S>>& values) {
        if (values.size() != params_.size())
            throw std::invalid_argument("set_param_values: count mismatch");
        for (size_t i = 0; i < values.size(); ++i) {
            if (!same_shape(values[i].shape, params_[i].shape()))
                throw std::invalid_argument("set_param_values: shape mismatch at " + names_[i]);
            params_[i].mutable_value() = values[i];
        }
    }

private:
    const ad::Var<S>& p(int i) const { return params_[static_cast<size_t>(i)]; }

    void init() {
        cfg_.validate();
        Rng rng(cfg_.init_seed);
        const int n_stages = static_cast<int>(cfg_.channels.size());
        int in_c = cfg_.clip_c;
        for (int s = 0; s < n_stages; ++s) {
            const int out_c = cfg_.channels[static_cast<size_t>(s)];
            const int fan_in = in_c * 27;
            Rng wr = rng.child("conv_w", static_cast<uint64_t>(s));
            Tensor<S> w({out_c, in_c, 3, 3, 3});
            const double std_w = std::sqrt(2.0 / fan_in);
            for (auto& v : w.data) v = static_cast<S>(wr.normal() * std_w);
            if (s == 0) {
                // The second half of the first-stage filters start as temporal-
                // difference filters (zero response to motionless input). An
                // untrained net otherwise cannot tell a clip from its static
                // counterpart, and the adversarial term cancels the
                // classification signal exactly. Contiguous placement keeps
                // them in their own norm group, so the weak motion response is
                // normalized among itself rather than against static channels.
                for (int o = out_c / 2; o < out_c; ++o)
                    for (int i = 0; i < in_c; ++i)
                        for (int kh = 0; kh < 3; ++kh)
                            for (int kw = 0; kw < 3; ++kw) {
                                const auto at = [&](int kt) -> S& {
                                    return w[((((static_cast<int64_t>(o) * in_c + i) * 3) + kt) * 3 + kh) * 3 + kw];
                                };
                                const S a = static_cast<S>(wr.normal() * std_w * std::sqrt(1.5));
                                at(0) = a;
                                at(1) = S(0);
                                at(2) = static_cast<S>(-a);
                            }
            }
            push("stage" + std::to_string(s) + ".conv.w", std::move(w));
            push("stage" + std::to_string(s) + ".conv.b", Tensor<S>({out_c}));
            push("stage" + std::to_string(s) + ".gn.gamma", Tensor<S>({out_c}, S(1)));
            push("stage" + std::to_string(s) + ".gn.beta", Tensor<S>({out_c}));
            in_c = out_c;
        }
        // Zero-init head: logits start at 0, so the static-clip terms (and in
        // particular the input-gradient penalty) phase in as the head grows
        // instead of crushing the untrained backbone.
        push("head.w", Tensor<S>({cfg_.n_classes, in_c}));
        push("head.b", Tensor<S>({cfg_.n_classes}));
    }

    void push(std::string name, Tensor<S> t) {
        names_.push_back(std::move(name));
        params_.push_back(ad::Var<S>::leaf(std::move(t)));
    }

    EncoderConfig cfg_;
    std::vector<ad::Var<S>> params_;
    std::vector<std::string> names_;
};

// VideoClip frames (T,H,W,C) -> encoder layout [C,T,H,W].
template <class S>
Tensor<S> clip_to_chw(const VideoClip& clip) {
    Tensor<S> out({clip.c, clip.t, clip.h, clip.w});
    for (int t = 0; t < clip.t; ++t)
        for (int y = 0; y < clip.h; ++y)
            for (int x = 0; x < clip.w; ++x)
                for (int ch = 0; ch < clip.c; ++ch)
                    out[((static_cast<int64_t>(ch) * clip.t + t) * clip.h + y) * clip.w + x] =
                        static_cast<S>(clip.at(t, y, x, ch));
    return out;
}

// Softmax with max subtraction; entries >= 0 and sum to 1.
std::vector<double> predict_probs(std::span<const double> logits);

inline std::vector<double> logits_to_double(const Tensor<float>& t) {
    return {t.data.begin(), t.data.end()};
}
inline std::vector<double> logits_to_double(const Tensor<double>& t) { return t.data; }

int argmax_lowest_tiebreak(std::span<const double> values);

// ---------------------------------------------------------------------------
// checkpoints: json header line + '\0' + raw little-endian scalar data
// ---------------------------------------------------------------------------

inline constexpr const char* kCkptMagic = "VBCKPT1";

template <class S>
void save_checkpoint(const std::filesystem::path& path, const Encoder<S>& enc,
                     const std::string& rng_state = "") {
    nlohmann::json j;
    j["config"] = enc.config();
    j["names"] = enc.param_names();
    std::vector<std::vector<int>> shapes;
    for (const auto& v : enc.params()) shapes.push_back(v.shape());
    j["shapes"] = shapes;
    j["scalar_bytes"] = static_cast<int>(sizeof(S));
    j["rng_state"] = rng_state;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f << kCkptMagic << '\n' << j.dump() << '\n' << '\0';
    for (const auto& v : enc.params())
        f.write(reinterpret_cast<const char*>(v.value().ptr()),
                static_cast<std::streamsize>(v.value().numel() * sizeof(S)));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

template <class S>
Encoder<S> load_checkpoint(const std::filesystem::path& path, std::string* rng_state = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::string magic, header;
    std::getline(f, magic);
    if (magic != kCkptMagic) throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    std::getline(f, header);
    char z = 0;
    f.read(&z, 1);
    const auto j = nlohmann::json::parse(header);
    if (j.at("scalar_bytes").get<int>() != static_cast<int>(sizeof(S)))
        throw std::runtime_error("load_checkpoint: scalar width mismatch");
    Encoder<S> enc(j.at("config").get<EncoderConfig>());
    const auto shapes = j.at("shapes").get<std::vector<std::vector<int>>>();
    std::vector<Tensor<S>> values;
    for (const auto& sh : shapes) {
        Tensor<S> t(sh);
        f.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.numel() * sizeof(S)));
        values.push_back(std::move(t));
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    enc.set_param_values(values);
    if (rng_state) *rng_state = j.at("rng_state").get<std::string>();
    return enc;
}

}  // namespace vidbias
