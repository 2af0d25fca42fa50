#pragma once

// 3-D convolution (cross-correlation) over [C, T, H, W] tensors, plus its
// input- and weight-gradient contractions. The three kernels are mutual
// adjoints, so each graph op's VJP is again one op of the family — this is
// what makes the second-order gradient-penalty path possible.

#include <array>
#include <stdexcept>

#include "vidbias/autodiff.hpp"
#include "vidbias/tensor.hpp"

namespace vidbias::ad {

struct ConvSpec {
    std::array<int, 3> stride{1, 1, 1};  // (t, h, w)
    std::array<int, 3> pad{1, 1, 1};
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// y[o,to,ho,wo] = sum_{i,kt,kh,kw} x[i, to*st+kt-pt, ho*sh+kh-ph, wo*sw+kw-pw] * w[o,i,kt,kh,kw]
template <class S>
Tensor<S> conv3d_fwd_kernel(const Tensor<S>& x, const Tensor<S>& w, const ConvSpec& cs) {
    const int I = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(0), KT = w.dim(2), KH = w.dim(3), KW = w.dim(4);
    if (w.dim(1) != I) throw std::invalid_argument("conv3d: channel mismatch");
    const auto [st, sh, sw] = cs.stride;
    const auto [pt, ph, pw] = cs.pad;
    const int To = conv_out_dim(T, KT, st, pt);
    const int Ho = conv_out_dim(H, KH, sh, ph);
    const int Wo = conv_out_dim(W, KW, sw, pw);
    if (To <= 0 || Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv3d: empty output");

    Tensor<S> y({O, To, Ho, Wo});
    const S* px = x.ptr();
    const S* pw_ = w.ptr();
    S* py = y.ptr();
    std::vector<S> acc(static_cast<size_t>(Wo));

    for (int o = 0; o < O; ++o) {
        for (int to = 0; to < To; ++to) {
            for (int ho = 0; ho < Ho; ++ho) {
                for (int q = 0; q < Wo; ++q) acc[static_cast<size_t>(q)] = 0;
                for (int i = 0; i < I; ++i) {
                    for (int kt = 0; kt < KT; ++kt) {
                        const int ti = to * st + kt - pt;
                        if (ti < 0 || ti >= T) continue;
                        for (int kh = 0; kh < KH; ++kh) {
                            const int hi = ho * sh + kh - ph;
                            if (hi < 0 || hi >= H) continue;
                            const S* xrow = px + ((static_cast<int64_t>(i) * T + ti) * H + hi) * W;
                            const S* wrow = pw_ + (((static_cast<int64_t>(o) * I + i) * KT + kt) * KH + kh) * KW;
                            for (int kw = 0; kw < KW; ++kw) {
                                const S wv = wrow[kw];
                                const int off = kw - pw;
                                // valid wo: 0 <= wo*sw + off < W
                                int lo = off < 0 ? (-off + sw - 1) / sw : 0;
                                int hi_w = (W - 1 - off) / sw + 1;
                                if (hi_w > Wo) hi_w = Wo;
                                const S* xr = xrow + off;
                                for (int wo = lo; wo < hi_w; ++wo)
                                    acc[static_cast<size_t>(wo)] += xr[wo * sw] * wv;
                            }
                        }
                    }
                }
                S* yrow = py + ((static_cast<int64_t>(o) * To + to) * Ho + ho) * Wo;
                for (int q = 0; q < Wo; ++q) yrow[q] = acc[static_cast<size_t>(q)];
            }
        }
    }
    return y;
}

// dx[i,t,h,w] = sum over output positions hit through the kernel.
template <class S>
Tensor<S> conv3d_dgrad_kernel(const Tensor<S>& g, const Tensor<S>& w, const ConvSpec& cs,
                              const std::vector<int>& x_shape) {
    const int I = x_shape[0], T = x_shape[1], H = x_shape[2], W = x_shape[3];
    const int O = w.dim(0), KT = w.dim(2), KH = w.dim(3), KW = w.dim(4);
    const auto [st, sh, sw] = cs.stride;
    const auto [pt, ph, pw] = cs.pad;
    const int To = g.dim(1), Ho = g.dim(2), Wo = g.dim(3);

    Tensor<S> dx(x_shape);
    const S* pg = g.ptr();
    const S* pw_ = w.ptr();
    S* pdx = dx.ptr();

    for (int o = 0; o < O; ++o) {
        for (int to = 0; to < To; ++to) {
            for (int ho = 0; ho < Ho; ++ho) {
                const S* grow = pg + ((static_cast<int64_t>(o) * To + to) * Ho + ho) * Wo;
                for (int i = 0; i < I; ++i) {
                    for (int kt = 0; kt < KT; ++kt) {
                        const int ti = to * st + kt - pt;
                        if (ti < 0 || ti >= T) continue;
                        for (int kh = 0; kh < KH; ++kh) {
                            const int hi = ho * sh + kh - ph;
                            if (hi < 0 || hi >= H) continue;
                            S* xrow = pdx + ((static_cast<int64_t>(i) * T + ti) * H + hi) * W;
                            const S* wrow = pw_ + (((static_cast<int64_t>(o) * I + i) * KT + kt) * KH + kh) * KW;
                            for (int kw = 0; kw < KW; ++kw) {
                                const S wv = wrow[kw];
                                const int off = kw - pw;
                                int lo = off < 0 ? (-off + sw - 1) / sw : 0;
                                int hi_w = (W - 1 - off) / sw + 1;
                                if (hi_w > Wo) hi_w = Wo;
                                S* xr = xrow + off;
                                for (int wo = lo; wo < hi_w; ++wo)
                                    xr[wo * sw] += grow[wo] * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// dw[o,i,kt,kh,kw] = sum_{to,ho,wo} g[o,to,ho,wo] * x[i, to*st+kt-pt, ...]
template <class S>
Tensor<S> conv3d_wgrad_kernel(const Tensor<S>& x, const Tensor<S>& g, const ConvSpec& cs,
                              const std::vector<int>& w_shape) {
    const int I = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w_shape[0], KT = w_shape[2], KH = w_shape[3], KW = w_shape[4];
    const auto [st, sh, sw] = cs.stride;
    const auto [pt, ph, pw] = cs.pad;
    const int To = g.dim(1), Ho = g.dim(2), Wo = g.dim(3);

    Tensor<S> dw(w_shape);
    const S* px = x.ptr();
    const S* pg = g.ptr();
    S* pdw = dw.ptr();

    for (int o = 0; o < O; ++o) {
        for (int to = 0; to < To; ++to) {
            for (int ho = 0; ho < Ho; ++ho) {
                const S* grow = pg + ((static_cast<int64_t>(o) * To + to) * Ho + ho) * Wo;
                for (int i = 0; i < I; ++i) {
                    for (int kt = 0; kt < KT; ++kt) {
                        const int ti = to * st + kt - pt;
                        if (ti < 0 || ti >= T) continue;
                        for (int kh = 0; kh < KH; ++kh) {
                            const int hi = ho * sh + kh - ph;
                            if (hi < 0 || hi >= H) continue;
                            const S* xrow = px + ((static_cast<int64_t>(i) * T + ti) * H + hi) * W;
                            S* wrow = pdw + (((static_cast<int64_t>(o) * I + i) * KT + kt) * KH + kh) * KW;
                            for (int kw = 0; kw < KW; ++kw) {
                                const int off = kw - pw;
                                int lo = off < 0 ? (-off + sw - 1) / sw : 0;
                                int hi_w = (W - 1 - off) / sw + 1;
                                if (hi_w > Wo) hi_w = Wo;
                                const S* xr = xrow + off;
                                S acc = 0;
                                for (int wo = lo; wo < hi_w; ++wo)
                                    acc += grow[wo] * xr[wo * sw];
                                wrow[kw] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
    return dw;
}

// ---------------------------------------------------------------------------
// graph ops (closed under differentiation)
// ---------------------------------------------------------------------------

template <class S>
Var<S> conv3d(const Var<S>& x, const Var<S>& w, const ConvSpec& cs);
template <class S>
Var<S> conv3d_dgrad(const Var<S>& g, const Var<S>& w, const ConvSpec& cs, std::vector<int> x_shape);
template <class S>
Var<S> conv3d_wgrad(const Var<S>& x, const Var<S>& g, const ConvSpec& cs, std::vector<int> w_shape);

template <class S>
Var<S> conv3d(const Var<S>& x, const Var<S>& w, const ConvSpec& cs) {
    Tensor<S> y = conv3d_fwd_kernel(x.value(), w.value(), cs);
    std::vector<int> xs = x.shape(), ws = w.shape();
    return Var<S>::op(std::move(y), {x, w},
        [cs, xs, ws](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
                     const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = conv3d_dgrad(g, p[1], cs, xs);
            if (need[1]) pg[1] = conv3d_wgrad(p[0], g, cs, ws);
            return pg;
        });
}

template <class S>
Var<S> conv3d_dgrad(const Var<S>& g, const Var<S>& w, const ConvSpec& cs, std::vector<int> x_shape) {
    Tensor<S> dx = conv3d_dgrad_kernel(g.value(), w.value(), cs, x_shape);
    std::vector<int> ws = w.shape();
    return Var<S>::op(std::move(dx), {g, w},
        [cs, ws](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& h,
                 const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = conv3d(h, p[1], cs);
            if (need[1]) pg[1] = conv3d_wgrad(h, p[0], cs, ws);
            return pg;
        });
}

template <class S>
Var<S> conv3d_wgrad(const Var<S>& x, const Var<S>& g, const ConvSpec& cs, std::vector<int> w_shape) {
    Tensor<S> dw = conv3d_wgrad_kernel(x.value(), g.value(), cs, w_shape);
    std::vector<int> xs = x.shape();
    return Var<S>::op(std::move(dw), {x, g},
        [cs, xs](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& u,
                 const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = conv3d_dgrad(p[1], u, cs, xs);
            if (need[1]) pg[1] = conv3d(p[0], u, cs);
            return pg;
        });
}

}  // namespace vidbias::ad
