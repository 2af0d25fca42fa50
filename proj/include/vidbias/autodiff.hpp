#pragma once

// Reverse-mode tape with graph-valued adjoints. Every primitive's VJP is
// expressed in terms of other primitives, so gradients are themselves
// differentiable (the input-gradient penalty needs one backward pass through
// another backward pass). Graphs are per-sample and thread-confined; leaf
// nodes may be shared read-only across threads.

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "vidbias/tensor.hpp"

namespace vidbias::ad {

using vidbias::Tensor;

template <class S>
class Var {
public:
    struct Node;
    using VjpFn = std::function<std::vector<Var<S>>(const std::vector<Var<S>>& parents,
                                                    const Var<S>& out, const Var<S>& gout,
                                                    const std::vector<char>& need)>;

    struct Node {
        Tensor<S> value;
        std::vector<Var<S>> parents;
        VjpFn vjp;
        bool requires_grad = false;
    };

    Var() = default;

    static Var constant(Tensor<S> t) {
        Var v;
        v.n_ = std::make_shared<Node>();
        v.n_->value = std::move(t);
        return v;
    }

    static Var leaf(Tensor<S> t) {
        Var v = constant(std::move(t));
        v.n_->requires_grad = true;
        return v;
    }

    static Var op(Tensor<S> value, std::vector<Var<S>> parents, VjpFn vjp) {
        Var v;
        v.n_ = std::make_shared<Node>();
        v.n_->value = std::move(value);
        v.n_->parents = std::move(parents);
        v.n_->vjp = std::move(vjp);
        for (const auto& p : v.n_->parents)
            if (p.requires_grad()) v.n_->requires_grad = true;
        return v;
    }

    bool defined() const { return static_cast<bool>(n_); }
    const Tensor<S>& value() const { return n_->value; }
    Tensor<S>& mutable_value() { return n_->value; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    const std::vector<int>& shape() const { return n_->value.shape; }
    Node* node() const { return n_.get(); }

    Var detach() const { return constant(n_->value); }

private:
    std::shared_ptr<Node> n_;
};

// ---------------------------------------------------------------------------
// elementwise / structural primitives
// ---------------------------------------------------------------------------

template <class S>
Var<S> constant(Tensor<S> t) { return Var<S>::constant(std::move(t)); }

template <class S>
Var<S> zeros_like_var(const Var<S>& x) {
    return Var<S>::constant(Tensor<S>(x.shape()));
}

template <class S>
Var<S> reshape(const Var<S>& x, std::vector<int> sh) {
    if (Tensor<S>::numel_of(sh) != x.value().numel())
        throw std::invalid_argument("reshape: numel mismatch " + shape_str(x.shape()) + " -> " + shape_str(sh));
    Tensor<S> out(sh, x.value().data);
    std::vector<int> orig = x.shape();
    return Var<S>::op(std::move(out), {x},
        [orig](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
               const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = reshape(g, orig);
            return pg;
        });
}

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    if (!same_shape(a.shape(), b.shape()))
        throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<S> out(a.shape());
    const S* pa = a.value().ptr();
    const S* pb = b.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    return Var<S>::op(std::move(out), {a, b},
        [](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = g;
            if (need[1]) pg[1] = g;
            return pg;
        });
}

template <class S>
Var<S> neg(const Var<S>& x) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = -px[i];
    return Var<S>::op(std::move(out), {x},
        [](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = neg(g);
            return pg;
        });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    if (!same_shape(a.shape(), b.shape()))
        throw std::invalid_argument("sub: shape mismatch");
    Tensor<S> out(a.shape());
    const S* pa = a.value().ptr();
    const S* pb = b.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    return Var<S>::op(std::move(out), {a, b},
        [](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = g;
            if (need[1]) pg[1] = neg(g);
            return pg;
        });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    if (!same_shape(a.shape(), b.shape()))
        throw std::invalid_argument("mul: shape mismatch");
    Tensor<S> out(a.shape());
    const S* pa = a.value().ptr();
    const S* pb = b.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    return Var<S>::op(std::move(out), {a, b},
        [](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = mul(g, p[1]);
            if (need[1]) pg[1] = mul(g, p[0]);
            return pg;
        });
}

template <class S>
Var<S> scale(const Var<S>& x, S c) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] * c;
    return Var<S>::op(std::move(out), {x},
        [c](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
            const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = scale(g, c);
            return pg;
        });
}

template <class S>
Var<S> add_const(const Var<S>& x, S c) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = px[i] + c;
    return Var<S>::op(std::move(out), {x},
        [](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = g;
            return pg;
        });
}

// x^p for real constant p; domain handled by the caller.
template <class S>
Var<S> pow_const(const Var<S>& x, double p) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = static_cast<S>(std::pow(static_cast<double>(px[i]), p));
    return Var<S>::op(std::move(out), {x},
        [p](const std::vector<Var<S>>& par, const Var<S>&, const Var<S>& g,
            const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = mul(g, scale(pow_const(par[0], p - 1.0), static_cast<S>(p)));
            return pg;
        });
}

// x^p for x > 0, exactly 0 at x == 0 (derivative taken as 0 there). Used for
// norms: ||g|| = pow_safe(sum g^2, 1/2) stays differentiable at the norm's
// minimum, where the plain power rule would divide by zero.
template <class S>
Var<S> pow_safe(const Var<S>& x, double p) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i)
        po[i] = px[i] > S(0) ? static_cast<S>(std::pow(static_cast<double>(px[i]), p)) : S(0);
    return Var<S>::op(std::move(out), {x},
        [p](const std::vector<Var<S>>& par, const Var<S>&, const Var<S>& g,
            const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = mul(g, scale(pow_safe(par[0], p - 1.0), static_cast<S>(p)));
            return pg;
        });
}

template <class S>
Var<S> exp_(const Var<S>& x) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = std::exp(px[i]);
    return Var<S>::op(std::move(out), {x},
        [](const std::vector<Var<S>>&, const Var<S>& out, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = mul(g, out);
            return pg;
        });
}

template <class S>
Var<S> log_(const Var<S>& x) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = std::log(px[i]);
    return Var<S>::op(std::move(out), {x},
        [](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = mul(g, pow_const(p[0], -1.0));
            return pg;
        });
}

template <class S>
Var<S> tanh_(const Var<S>& x) {
    Tensor<S> out(x.shape());
    const S* px = x.value().ptr();
    S* po = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
    return Var<S>::op(std::move(out), {x},
        [](const std::vector<Var<S>>&, const Var<S>& out, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) {
                Var<S> one_minus_sq = add_const(neg(mul(out, out)), S(1));
                pg[0] = mul(g, one_minus_sq);
            }
            return pg;
        });
}

// ---------------------------------------------------------------------------
// row reductions over a [R, M] view
// ---------------------------------------------------------------------------

template <class S>
Var<S> spread_rows(const Var<S>& v, int m);

template <class S>
Var<S> row_sum(const Var<S>& x) {
    if (x.value().rank() != 2) throw std::invalid_argument("row_sum: expected rank-2");
    const int r = x.value().dim(0), m = x.value().dim(1);
    Tensor<S> out({r});
    const S* px = x.value().ptr();
    for (int i = 0; i < r; ++i) {
        S acc = 0;
        const S* row = px + static_cast<int64_t>(i) * m;
        for (int j = 0; j < m; ++j) acc += row[j];
        out[i] = acc;
    }
    return Var<S>::op(std::move(out), {x},
        [m](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
            const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = spread_rows(g, m);
            return pg;
        });
}

template <class S>
Var<S> spread_rows(const Var<S>& v, int m) {
    if (v.value().rank() != 1) throw std::invalid_argument("spread_rows: expected rank-1");
    const int r = v.value().dim(0);
    Tensor<S> out({r, m});
    const S* pv = v.value().ptr();
    S* po = out.ptr();
    for (int i = 0; i < r; ++i) {
        const S val = pv[i];
        S* row = po + static_cast<int64_t>(i) * m;
        for (int j = 0; j < m; ++j) row[j] = val;
    }
    return Var<S>::op(std::move(out), {v},
        [](const std::vector<Var<S>>&, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(1);
            if (need[0]) pg[0] = row_sum(g);
            return pg;
        });
}

// ---------------------------------------------------------------------------
// small dense linear algebra: y = W x, y = W^T x, outer(a, b)
// ---------------------------------------------------------------------------

template <class S>
Var<S> matvec(const Var<S>& w, const Var<S>& x);
template <class S>
Var<S> matvec_t(const Var<S>& w, const Var<S>& y);
template <class S>
Var<S> outer(const Var<S>& a, const Var<S>& b);

template <class S>
Var<S> matvec(const Var<S>& w, const Var<S>& x) {
    const int o = w.value().dim(0), i = w.value().dim(1);
    if (x.value().rank() != 1 || x.value().dim(0) != i)
        throw std::invalid_argument("matvec: shape mismatch");
    Tensor<S> out({o});
    const S* pw = w.value().ptr();
    const S* px = x.value().ptr();
    for (int r = 0; r < o; ++r) {
        S acc = 0;
        const S* row = pw + static_cast<int64_t>(r) * i;
        for (int c = 0; c < i; ++c) acc += row[c] * px[c];
        out[r] = acc;
    }
    return Var<S>::op(std::move(out), {w, x},
        [](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = outer(g, p[1]);
            if (need[1]) pg[1] = matvec_t(p[0], g);
            return pg;
        });
}

template <class S>
Var<S> matvec_t(const Var<S>& w, const Var<S>& y) {
    const int o = w.value().dim(0), i = w.value().dim(1);
    if (y.value().rank() != 1 || y.value().dim(0) != o)
        throw std::invalid_argument("matvec_t: shape mismatch");
    Tensor<S> out({i});
    const S* pw = w.value().ptr();
    const S* py = y.value().ptr();
    for (int r = 0; r < o; ++r) {
        const S yr = py[r];
        const S* row = pw + static_cast<int64_t>(r) * i;
        for (int c = 0; c < i; ++c) out[c] += row[c] * yr;
    }
    return Var<S>::op(std::move(out), {w, y},
        [](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = outer(p[1], g);
            if (need[1]) pg[1] = matvec(p[0], g);
            return pg;
        });
}

template <class S>
Var<S> outer(const Var<S>& a, const Var<S>& b) {
    const int o = a.value().dim(0), i = b.value().dim(0);
    Tensor<S> out({o, i});
    const S* pa = a.value().ptr();
    const S* pb = b.value().ptr();
    S* po = out.ptr();
    for (int r = 0; r < o; ++r)
        for (int c = 0; c < i; ++c) po[static_cast<int64_t>(r) * i + c] = pa[r] * pb[c];
    return Var<S>::op(std::move(out), {a, b},
        [](const std::vector<Var<S>>& p, const Var<S>&, const Var<S>& g,
           const std::vector<char>& need) {
            std::vector<Var<S>> pg(2);
            if (need[0]) pg[0] = matvec(g, p[1]);
            if (need[1]) pg[1] = matvec_t(g, p[0]);
            return pg;
        });
}

// ---------------------------------------------------------------------------
// reverse pass
// ---------------------------------------------------------------------------

// Adjoints of `output` with respect to each entry of `wrt`. The returned
// Vars carry their own graphs, so they can be differentiated again.
// Inputs that `output` does not depend on get a zero adjoint.
template <class S>
std::vector<Var<S>> grad(const Var<S>& output, const std::vector<Var<S>>& wrt) {
    using Node = typename Var<S>::Node;

    // Post-order over the requires_grad subgraph (iterative; graphs get deep).
    std::vector<Node*> order;
    std::unordered_map<Node*, int> state;  // 0 = unseen, 1 = open, 2 = done
    std::unordered_map<Node*, Var<S>> byptr;
    std::vector<Node*> stack;
    if (output.requires_grad()) {
        stack.push_back(output.node());
        byptr[output.node()] = output;
    }
    while (!stack.empty()) {
        Node* n = stack.back();
        int& st = state[n];
        if (st == 0) {
            st = 1;
            for (const auto& p : n->parents) {
                if (p.requires_grad() && state[p.node()] == 0) {
                    stack.push_back(p.node());
                    byptr[p.node()] = p;
                }
            }
        } else {
            if (st == 1) {
                st = 2;
                order.push_back(n);
            }
            stack.pop_back();
        }
    }

    std::unordered_map<Node*, Var<S>> cot;
    if (output.requires_grad())
        cot[output.node()] = constant(Tensor<S>(output.shape(), S(1)));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        auto found = cot.find(n);
        if (found == cot.end() || n->parents.empty()) continue;
        const Var<S>& g = found->second;
        std::vector<char> need(n->parents.size(), 0);
        for (size_t i = 0; i < n->parents.size(); ++i)
            need[i] = n->parents[i].requires_grad() ? 1 : 0;
        std::vector<Var<S>> pgrads = n->vjp(n->parents, byptr[n], g, need);
        for (size_t i = 0; i < n->parents.size(); ++i) {
            if (!need[i] || !pgrads[i].defined()) continue;
            Node* pn = n->parents[i].node();
            auto c = cot.find(pn);
            if (c == cot.end())
                cot[pn] = pgrads[i];
            else
                c->second = add(c->second, pgrads[i]);
        }
    }

    std::vector<Var<S>> result;
    result.reserve(wrt.size());
    for (const auto& v : wrt) {
        auto c = cot.find(v.node());
        if (c != cot.end())
            result.push_back(c->second);
        else
            result.push_back(constant(Tensor<S>(v.shape())));
    }
    return result;
}

// ---------------------------------------------------------------------------
// compositions
// ---------------------------------------------------------------------------

template <class S>
Var<S> sum_to_scalar(const Var<S>& x) {
    return row_sum(reshape(x, {1, static_cast<int>(x.value().numel())}));
}

template <class S>
Var<S> dot(const Var<S>& a, const Var<S>& b) {
    return sum_to_scalar(mul(a, b));
}

template <class S>
Var<S> sqrt_(const Var<S>& x) { return pow_const(x, 0.5); }

// log-softmax over a rank-1 logits vector. The running max is detached: the
// identity lse(x) = m + log sum exp(x - m) holds for any fixed m, so values
// and derivatives of every order are exact.
template <class S>
Var<S> log_softmax(const Var<S>& logits) {
    const int n = static_cast<int>(logits.value().numel());
    S m = logits.value()[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits.value()[i]);
    Var<S> z = add_const(logits, -m);                         // [n]
    Var<S> z2 = reshape(z, {1, n});
    Var<S> lse = log_(row_sum(exp_(z2)));                     // [1]
    return sub(z, reshape(spread_rows(lse, n), {n}));
}

template <class S>
Var<S> softmax(const Var<S>& logits) {
    return exp_(log_softmax(logits));
}

// gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))); smooth, so the
// second-order path of the gradient penalty is well-defined.
template <class S>
Var<S> gelu(const Var<S>& x) {
    const S k = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
    const S a = static_cast<S>(0.044715);
    Var<S> x3 = mul(x, mul(x, x));
    Var<S> inner = scale(add(x, scale(x3, a)), k);
    Var<S> t = add_const(tanh_(inner), S(1));
    return scale(mul(x, t), S(0.5));
}

}  // namespace vidbias::ad
