// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Neural-network building blocks on the autodiff engine: im2col-backed
// convolution, instance normalization, pooling, nearest upsampling, and
// the Adam optimizer.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rst/autograd.hpp"

namespace rst {

template <typename S>
using MatrixRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

/// Gather conv patches: K(row=(c*kh+ky)*kw+kx, col=oy*wo+ox) with zero padding.
template <typename S>
void im2col(const Tensor<S>& x, Eigen::Index b, int kh, int kw, int stride, int pad,
            Eigen::Index ho, Eigen::Index wo, MatrixRM<S>& k) {
    const Shape& s = x.shape;
    for (Eigen::Index c = 0; c < s.c; ++c) {
        const S* plane = x.plane(b, c);
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                S* row = k.data() + ((c * kh + ky) * kw + kx) * ho * wo;
                for (Eigen::Index oy = 0; oy < ho; ++oy) {
                    const Eigen::Index iy = oy * stride - pad + ky;
                    S* dst = row + oy * wo;
                    if (iy < 0 || iy >= s.h) {
                        std::fill_n(dst, wo, S(0));
                        continue;
                    }
                    const S* src = plane + iy * s.w;
                    for (Eigen::Index ox = 0; ox < wo; ++ox) {
                        const Eigen::Index ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < s.w) ? src[ix] : S(0);
                    }
                }
            }
    }
}

/// Scatter-add the im2col layout back onto an input-shaped gradient.
template <typename S>
void col2im(const MatrixRM<S>& k, Eigen::Index b, int kh, int kw, int stride, int pad,
            Eigen::Index ho, Eigen::Index wo, Tensor<S>& gx) {
    const Shape& s = gx.shape;
    for (Eigen::Index c = 0; c < s.c; ++c) {
        S* plane = gx.plane(b, c);
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const S* row = k.data() + ((c * kh + ky) * kw + kx) * ho * wo;
                for (Eigen::Index oy = 0; oy < ho; ++oy) {
                    const Eigen::Index iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= s.h) continue;
                    S* dst = plane + iy * s.w;
                    const S* src = row + oy * wo;
                    for (Eigen::Index ox = 0; ox < wo; ++ox) {
                        const Eigen::Index ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < s.w) dst[ix] += src[ox];
                    }
                }
            }
    }
}

}  // namespace detail

/// 2-D convolution with zero padding. weight (Cout,Cin,kh,kw), bias (1,Cout,1,1).
template <typename S>
Variable<S> conv2d(const Variable<S>& x, const Variable<S>& weight, const Variable<S>& bias,
                   int stride, int pad) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (xs.c != ws.c)
        throw InvalidArgument("conv2d: input channels " + std::to_string(xs.c) +
                              " != weight channels " + std::to_string(ws.c));
    const int kh = static_cast<int>(ws.h), kw = static_cast<int>(ws.w);
    const Eigen::Index ho = (xs.h + 2 * pad - kh) / stride + 1;
    const Eigen::Index wo = (xs.w + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1)
        throw InvalidArgument("conv2d: output would be empty for input " + xs.str());
    const Eigen::Index ckk = ws.c * kh * kw;
    const Eigen::Index n_cols = ho * wo;

    Tensor<S> out(Shape{xs.b, ws.b, ho, wo});
    Eigen::Map<const MatrixRM<S>> wm(weight.value().data.data(), ws.b, ckk);

    const bool need_bp = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
    auto cols = need_bp ? std::make_shared<std::vector<MatrixRM<S>>>() : nullptr;

    MatrixRM<S> k(ckk, n_cols);
    for (Eigen::Index b = 0; b < xs.b; ++b) {
        detail::im2col(x.value(), b, kh, kw, stride, pad, ho, wo, k);
        Eigen::Map<MatrixRM<S>> ym(out.plane(b, 0), ws.b, n_cols);
        ym.noalias() = wm * k;
        for (Eigen::Index c = 0; c < ws.b; ++c) ym.row(c).array() += bias.value().data[c];
        if (need_bp) cols->push_back(k);
    }

    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {x, weight, bias},
        [x, weight, bias, cols, kh, kw, stride, pad, ho, wo, ckk, n_cols](Node& n) {
            const Shape xs2 = x.shape();
            const Eigen::Index cout = weight.shape().b;
            Eigen::Map<const MatrixRM<S>> wm2(weight.value().data.data(), cout, ckk);
            Tensor<S> gw, gb, gx;
            if (weight.requires_grad()) gw = Tensor<S>::zeros(weight.shape());
            if (bias.requires_grad()) gb = Tensor<S>::zeros(bias.shape());
            if (x.requires_grad()) gx = Tensor<S>::zeros(xs2);
            Eigen::Map<MatrixRM<S>> gwm(gw.defined() ? gw.data.data() : nullptr,
                                        gw.defined() ? cout : 0, gw.defined() ? ckk : 0);
            MatrixRM<S> gk;
            for (Eigen::Index b = 0; b < xs2.b; ++b) {
                Eigen::Map<const MatrixRM<S>> gy(n.grad.plane(b, 0), cout, n_cols);
                if (gw.defined()) gwm.noalias() += gy * (*cols)[b].transpose();
                if (gb.defined())
                    for (Eigen::Index c = 0; c < cout; ++c) gb.data[c] += gy.row(c).sum();
                if (gx.defined()) {
                    gk.noalias() = wm2.transpose() * gy;
                    detail::col2im(gk, b, kh, kw, stride, pad, ho, wo, gx);
                }
            }
            if (gw.defined()) weight.accumulate_grad(std::move(gw));
            if (gb.defined()) bias.accumulate_grad(std::move(gb));
            if (gx.defined()) x.accumulate_grad(std::move(gx));
        },
        "conv2d");
}

/// Instance normalization with affine parameters gamma/beta of shape (1,C,1,1).
template <typename S>
Variable<S> instance_norm(const Variable<S>& x, const Variable<S>& gamma, const Variable<S>& beta,
                          S eps = S(1e-5)) {
    const Shape s = x.shape();
    if (gamma.shape().c != s.c || beta.shape().c != s.c)
        throw InvalidArgument("instance_norm: affine parameter channels do not match input");
    const Eigen::Index hw = s.h * s.w;
    auto mu = std::make_shared<Tensor<S>>(Shape{s.b, s.c, 1, 1});
    auto inv = std::make_shared<Tensor<S>>(Shape{s.b, s.c, 1, 1});
    Tensor<S> out(s);
    for (Eigen::Index b = 0; b < s.b; ++b)
        for (Eigen::Index c = 0; c < s.c; ++c) {
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> p(x.value().plane(b, c), hw);
            const S m = p.sum() / static_cast<S>(hw);
            const S var = (p - m).square().sum() / static_cast<S>(hw);
            const S iv = S(1) / std::sqrt(var + eps);
            mu->data[b * s.c + c] = m;
            inv->data[b * s.c + c] = iv;
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.plane(b, c), hw) =
                (p - m) * iv * gamma.value().data[c] + beta.value().data[c];
        }
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, mu, inv, s, hw](Node& n) {
            Tensor<S> ggamma, gbeta, gx;
            if (gamma.requires_grad()) ggamma = Tensor<S>::zeros(gamma.shape());
            if (beta.requires_grad()) gbeta = Tensor<S>::zeros(beta.shape());
            if (x.requires_grad()) gx = Tensor<S>::zeros(s);
            using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
            for (Eigen::Index b = 0; b < s.b; ++b)
                for (Eigen::Index c = 0; c < s.c; ++c) {
                    Eigen::Map<const Arr> p(x.value().plane(b, c), hw);
                    Eigen::Map<const Arr> g(n.grad.plane(b, c), hw);
                    const S m = mu->data[b * s.c + c];
                    const S iv = inv->data[b * s.c + c];
                    Arr xhat = (p - m) * iv;
                    if (gbeta.defined()) gbeta.data[c] += g.sum();
                    if (ggamma.defined()) ggamma.data[c] += (g * xhat).sum();
                    if (gx.defined()) {
                        const S gmean = g.sum() / static_cast<S>(hw);
                        const S gxhat_mean = (g * xhat).sum() / static_cast<S>(hw);
                        Eigen::Map<Arr>(gx.plane(b, c), hw) =
                            gamma.value().data[c] * iv * (g - gmean - xhat * gxhat_mean);
                    }
                }
            if (ggamma.defined()) gamma.accumulate_grad(std::move(ggamma));
            if (gbeta.defined()) beta.accumulate_grad(std::move(gbeta));
            if (gx.defined()) x.accumulate_grad(std::move(gx));
        },
        "instance_norm");
}

/// 2x2 max pooling, stride 2, floor semantics (trailing odd row/col dropped).
template <typename S>
Variable<S> max_pool2(const Variable<S>& x) {
    const Shape s = x.shape();
    const Eigen::Index ho = s.h / 2, wo = s.w / 2;
    if (ho < 1 || wo < 1) throw InvalidArgument("max_pool2: input too small " + s.str());
    Tensor<S> out(Shape{s.b, s.c, ho, wo});
    auto argmax = std::make_shared<std::vector<Eigen::Index>>(out.size());
    Eigen::Index o = 0;
    for (Eigen::Index b = 0; b < s.b; ++b)
        for (Eigen::Index c = 0; c < s.c; ++c) {
            const S* p = x.value().plane(b, c);
            const Eigen::Index base = (b * s.c + c) * s.h * s.w;
            for (Eigen::Index oy = 0; oy < ho; ++oy)
                for (Eigen::Index ox = 0; ox < wo; ++ox, ++o) {
                    Eigen::Index best = (2 * oy) * s.w + 2 * ox;
                    S bv = p[best];
                    const Eigen::Index cand[3] = {(2 * oy) * s.w + 2 * ox + 1,
                                                  (2 * oy + 1) * s.w + 2 * ox,
                                                  (2 * oy + 1) * s.w + 2 * ox + 1};
                    for (Eigen::Index idx : cand)
                        if (p[idx] > bv) {
                            bv = p[idx];
                            best = idx;
                        }
                    out.data[o] = bv;
                    (*argmax)[o] = base + best;
                }
        }
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {x},
        [x, argmax](Node& n) {
            Tensor<S> gx = Tensor<S>::zeros(x.shape());
            for (Eigen::Index i = 0; i < n.grad.size(); ++i)
                gx.data[(*argmax)[i]] += n.grad.data[i];
            x.accumulate_grad(std::move(gx));
        },
        "max_pool2");
}

/// Nearest-neighbor 2x upsampling.
template <typename S>
Variable<S> upsample_nearest2(const Variable<S>& x) {
    const Shape s = x.shape();
    Tensor<S> out(Shape{s.b, s.c, s.h * 2, s.w * 2});
    for (Eigen::Index b = 0; b < s.b; ++b)
        for (Eigen::Index c = 0; c < s.c; ++c) {
            const S* src = x.value().plane(b, c);
            S* dst = out.plane(b, c);
            for (Eigen::Index y = 0; y < s.h; ++y)
                for (Eigen::Index xx = 0; xx < s.w; ++xx) {
                    const S v = src[y * s.w + xx];
                    S* d = dst + (2 * y) * (2 * s.w) + 2 * xx;
                    d[0] = v;
                    d[1] = v;
                    d[2 * s.w] = v;
                    d[2 * s.w + 1] = v;
                }
        }
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {x},
        [x, s](Node& n) {
            Tensor<S> gx(s);
            for (Eigen::Index b = 0; b < s.b; ++b)
                for (Eigen::Index c = 0; c < s.c; ++c) {
                    const S* g = n.grad.plane(b, c);
                    S* d = gx.plane(b, c);
                    for (Eigen::Index y = 0; y < s.h; ++y)
                        for (Eigen::Index xx = 0; xx < s.w; ++xx) {
                            const S* gp = g + (2 * y) * (2 * s.w) + 2 * xx;
                            d[y * s.w + xx] = gp[0] + gp[1] + gp[2 * s.w] + gp[2 * s.w + 1];
                        }
                }
            x.accumulate_grad(std::move(gx));
        },
        "upsample_nearest2");
}

// --- modules -----------------------------------------------------------------

template <typename S>
struct NamedParam {
    std::string name;
    Variable<S> var;
};

template <typename S>
struct Conv2dLayer {
    Variable<S> weight, bias;
    int stride = 1, pad = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int cin, int cout, int ksize, int stride_, int pad_, Rng& rng)
        : stride(stride_), pad(pad_) {
        const S stddev = static_cast<S>(std::sqrt(2.0 / (static_cast<double>(cin) * ksize * ksize)));
        weight = parameter(Tensor<S>::random_normal(Shape{cout, cin, ksize, ksize}, rng, stddev));
        bias = parameter(Tensor<S>::zeros(Shape{1, cout, 1, 1}));
    }

    Variable<S> operator()(const Variable<S>& x) const { return conv2d(x, weight, bias, stride, pad); }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

template <typename S>
struct InstanceNormLayer {
    Variable<S> gamma, beta;
    bool enabled = false;

    InstanceNormLayer() = default;
    InstanceNormLayer(int channels, bool enabled_) : enabled(enabled_) {
        if (enabled) {
            gamma = parameter(Tensor<S>::constant(Shape{1, channels, 1, 1}, S(1)));
            beta = parameter(Tensor<S>::zeros(Shape{1, channels, 1, 1}));
        }
    }

    Variable<S> operator()(const Variable<S>& x) const {
        return enabled ? instance_norm(x, gamma, beta) : x;
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
        if (!enabled) return;
        out.push_back({prefix + ".gamma", gamma});
        out.push_back({prefix + ".beta", beta});
    }
};

/// Adam with bias correction; owns references to the parameters it updates.
template <typename S>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<NamedParam<S>> params, double lr, double beta1, double beta2, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& p : params_) {
            m_.push_back(Tensor<S>::zeros(p.var.shape()));
            v_.push_back(Tensor<S>::zeros(p.var.shape()));
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.var.zero_grad();
    }

    void step() {
        ++t_;
        const S c1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
        const S c2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
        const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const Tensor<S>& g = params_[i].var.grad();
            m_[i].data = b1 * m_[i].data + (S(1) - b1) * g.data;
            v_[i].data = b2 * v_[i].data + (S(1) - b2) * g.data.square();
            params_[i].var.mutable_value().data -=
                static_cast<S>(lr_) * (m_[i].data / c1) / ((v_[i].data / c2).sqrt() + static_cast<S>(eps_));
        }
    }

    const std::vector<NamedParam<S>>& params() const { return params_; }
    std::vector<Tensor<S>>& moments_m() { return m_; }
    std::vector<Tensor<S>>& moments_v() { return v_; }
    const std::vector<Tensor<S>>& moments_m() const { return m_; }
    const std::vector<Tensor<S>>& moments_v() const { return v_; }
    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    double lr() const { return lr_; }

private:
    std::vector<NamedParam<S>> params_;
    std::vector<Tensor<S>> m_, v_;
    double lr_ = 1e-4, beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

}  // namespace rst
