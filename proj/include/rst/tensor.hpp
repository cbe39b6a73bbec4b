// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <array>
#include <sstream>
#include <utility>

#include "rst/common.hpp"

namespace rst {

/// Dense 4-D shape in (batch, channels, height, width) order.
struct Shape {
    Eigen::Index b = 0;
    Eigen::Index c = 0;
    Eigen::Index h = 0;
    Eigen::Index w = 0;

    Eigen::Index count() const { return b * c * h * w; }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << "(" << b << "," << c << "," << h << "," << w << ")";
        return os.str();
    }
};

/// Declared value range of an image-valued tensor. Feature maps ignore it.
enum class ValueRange { Unit, Signed };

/// Dense batched array, flat row-major (b, c, h, w) storage on an Eigen array.
template <typename Scalar>
struct Tensor {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Shape shape{};
    Array data;
    ValueRange range = ValueRange::Unit;

    Tensor() = default;
    explicit Tensor(const Shape& s, Scalar fill = Scalar(0))
        : shape(s), data(Array::Constant(s.count(), fill)) {}

    static Tensor zeros(const Shape& s) { return Tensor(s, Scalar(0)); }
    static Tensor constant(const Shape& s, Scalar v) { return Tensor(s, v); }

    static Tensor random_normal(const Shape& s, Rng& rng, Scalar stddev = Scalar(1)) {
        Tensor t(s);
        for (Eigen::Index i = 0; i < t.data.size(); ++i)
            t.data[i] = static_cast<Scalar>(rng.normal(0.0, static_cast<double>(stddev)));
        return t;
    }

    static Tensor random_uniform(const Shape& s, Rng& rng, Scalar lo = Scalar(0), Scalar hi = Scalar(1)) {
        Tensor t(s);
        for (Eigen::Index i = 0; i < t.data.size(); ++i)
            t.data[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        return t;
    }

    Eigen::Index size() const { return data.size(); }
    bool defined() const { return shape.count() > 0; }

    Eigen::Index index(Eigen::Index b_, Eigen::Index c_, Eigen::Index y, Eigen::Index x) const {
        return ((b_ * shape.c + c_) * shape.h + y) * shape.w + x;
    }
    Scalar& at(Eigen::Index b_, Eigen::Index c_, Eigen::Index y, Eigen::Index x) {
        return data[index(b_, c_, y, x)];
    }
    Scalar at(Eigen::Index b_, Eigen::Index c_, Eigen::Index y, Eigen::Index x) const {
        return data[index(b_, c_, y, x)];
    }

    /// Pointer to the start of one (batch, channel) plane of h*w scalars.
    Scalar* plane(Eigen::Index b_, Eigen::Index c_) {
        return data.data() + (b_ * shape.c + c_) * shape.h * shape.w;
    }
    const Scalar* plane(Eigen::Index b_, Eigen::Index c_) const {
        return data.data() + (b_ * shape.c + c_) * shape.h * shape.w;
    }

    bool all_finite() const { return data.isFinite().all(); }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.range = range;
        out.data = data.template cast<T>();
        return out;
    }
};

using ImageTensor = Tensor<float>;

/// Per-pixel nonnegative weights derived from a content image's Laplacian
/// magnitude; shape (B, 1, H, W).
struct EdgeWeightMap {
    Tensor<float> weights;
    Eigen::Index source_h = 0;
    Eigen::Index source_w = 0;
};

// --- broadcasting ------------------------------------------------------------

inline bool broadcast_compatible(const Shape& a, const Shape& b) {
    auto ok = [](Eigen::Index x, Eigen::Index y) { return x == y || x == 1 || y == 1; };
    return ok(a.b, b.b) && ok(a.c, b.c) && ok(a.h, b.h) && ok(a.w, b.w);
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    if (!broadcast_compatible(a, b))
        throw InvalidArgument("incompatible shapes for broadcast: " + a.str() + " vs " + b.str());
    return Shape{std::max(a.b, b.b), std::max(a.c, b.c), std::max(a.h, b.h), std::max(a.w, b.w)};
}

namespace detail {

/// Strides of a tensor when indexed through a broadcast output shape
/// (zero stride along singleton dims).
inline std::array<Eigen::Index, 4> broadcast_strides(const Shape& s, const Shape& out) {
    std::array<Eigen::Index, 4> st{};
    const Eigen::Index dims[4] = {s.b, s.c, s.h, s.w};
    const Eigen::Index odims[4] = {out.b, out.c, out.h, out.w};
    Eigen::Index stride = 1;
    Eigen::Index natural[4];
    for (int d = 3; d >= 0; --d) {
        natural[d] = stride;
        stride *= dims[d];
    }
    for (int d = 0; d < 4; ++d) st[d] = (dims[d] == odims[d]) ? natural[d] : 0;
    return st;
}

}  // namespace detail

template <typename S, typename F>
Tensor<S> broadcast_binary(const Tensor<S>& a, const Tensor<S>& b, F&& f) {
    if (a.shape == b.shape) {
        Tensor<S> out;
        out.shape = a.shape;
        out.data = a.data.binaryExpr(b.data, f);
        return out;
    }
    const Shape os = broadcast_shape(a.shape, b.shape);
    Tensor<S> out(os);
    const auto sa = detail::broadcast_strides(a.shape, os);
    const auto sb = detail::broadcast_strides(b.shape, os);
    Eigen::Index o = 0;
    for (Eigen::Index ib = 0; ib < os.b; ++ib)
        for (Eigen::Index ic = 0; ic < os.c; ++ic)
            for (Eigen::Index iy = 0; iy < os.h; ++iy) {
                Eigen::Index ia = ib * sa[0] + ic * sa[1] + iy * sa[2];
                Eigen::Index jb = ib * sb[0] + ic * sb[1] + iy * sb[2];
                for (Eigen::Index ix = 0; ix < os.w; ++ix, ++o)
                    out.data[o] = f(a.data[ia + ix * sa[3]], b.data[jb + ix * sb[3]]);
            }
    return out;
}

/// Sum-reduce `g` onto `target` along every broadcast (singleton) dim.
template <typename S>
Tensor<S> reduce_to_shape(const Tensor<S>& g, const Shape& target) {
    if (g.shape == target) return g;
    if (!broadcast_compatible(g.shape, target))
        throw InvalidArgument("reduce_to_shape: incompatible " + g.shape.str() + " -> " + target.str());
    Tensor<S> out = Tensor<S>::zeros(target);
    const auto st = detail::broadcast_strides(target, g.shape);
    Eigen::Index o = 0;
    const Shape& os = g.shape;
    for (Eigen::Index ib = 0; ib < os.b; ++ib)
        for (Eigen::Index ic = 0; ic < os.c; ++ic)
            for (Eigen::Index iy = 0; iy < os.h; ++iy) {
                Eigen::Index it = ib * st[0] + ic * st[1] + iy * st[2];
                for (Eigen::Index ix = 0; ix < os.w; ++ix, ++o)
                    out.data[it + ix * st[3]] += g.data[o];
            }
    return out;
}

/// Stack B single-image tensors (each batch 1) into one batch-B tensor.
template <typename S>
Tensor<S> stack_batch(const std::vector<Tensor<S>>& items) {
    if (items.empty()) throw InvalidArgument("stack_batch: empty list");
    const Shape s0 = items.front().shape;
    Tensor<S> out(Shape{static_cast<Eigen::Index>(items.size()) * s0.b, s0.c, s0.h, s0.w});
    out.range = items.front().range;
    Eigen::Index off = 0;
    for (const auto& t : items) {
        if (!(t.shape == s0)) throw InvalidArgument("stack_batch: mismatched item shapes");
        out.data.segment(off, t.size()) = t.data;
        off += t.size();
    }
    return out;
}

}  // namespace rst
