// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over rst::Tensor. Graphs are built by the
// free functions below and released when the last Variable referencing them
// goes out of scope. Backward runs once from a scalar root.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "rst/tensor.hpp"

namespace rst {

template <typename S>
class Variable {
public:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;  // allocated on first accumulation
        std::vector<Variable> parents;
        std::function<void(Node&)> backprop;  // reads node.grad, accumulates into parents
        bool requires_grad = false;
        const char* op = "leaf";
    };
    using NodePtr = std::shared_ptr<Node>;

    Variable() = default;

    explicit Variable(Tensor<S> value, bool requires_grad = false) : n_(std::make_shared<Node>()) {
        n_->value = std::move(value);
        n_->requires_grad = requires_grad;
    }

    static Variable make(Tensor<S> value, std::vector<Variable> parents,
                         std::function<void(Node&)> backprop, const char* op) {
        Variable v;
        v.n_ = std::make_shared<Node>();
        v.n_->value = std::move(value);
        v.n_->parents = std::move(parents);
        v.n_->op = op;
        for (const auto& p : v.n_->parents)
            if (p.requires_grad()) {
                v.n_->requires_grad = true;
                break;
            }
        if (v.n_->requires_grad) {
            v.n_->backprop = std::move(backprop);
        } else {
            v.n_->parents.clear();  // inference graphs free intermediates eagerly
        }
        return v;
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor<S>& value() const { return n_->value; }
    Tensor<S>& mutable_value() const { return n_->value; }
    const Shape& shape() const { return n_->value.shape; }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    // Variable is a shared handle onto a graph node; the node mutators below
    // are const because they change the pointee, not the handle.
    const Tensor<S>& grad() const {
        ensure_grad();
        return n_->grad;
    }
    Tensor<S>& mutable_grad() const {
        ensure_grad();
        return n_->grad;
    }
    void zero_grad() const {
        if (n_ && n_->grad.defined()) n_->grad.data.setZero();
    }

    void accumulate_grad(const Tensor<S>& g) const {
        if (!requires_grad()) return;
        ensure_grad();
        n_->grad.data += g.data;
    }
    void accumulate_grad(Tensor<S>&& g) const {
        if (!requires_grad()) return;
        if (!n_->grad.defined()) {
            n_->grad = std::move(g);
            return;
        }
        n_->grad.data += g.data;
    }

    /// Reverse pass from a scalar root; seeds d(root)/d(root) = 1.
    void backward() const {
        if (!n_) throw StateError("backward on undefined Variable");
        if (n_->value.size() != 1) throw InvalidArgument("backward requires a scalar root");
        if (!n_->requires_grad) return;
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        topo(n_.get(), seen, order);
        ensure_grad();
        n_->grad.data[0] += S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backprop) node->backprop(*node);
        }
    }

    Node* node() const { return n_.get(); }

private:
    void ensure_grad() const {
        if (!n_->grad.defined()) n_->grad = Tensor<S>::zeros(n_->value.shape);
    }

    static void topo(Node* n, std::unordered_set<Node*>& seen, std::vector<Node*>& order) {
        // iterative DFS; graphs can be deep for iterated generators
        struct Frame {
            Node* node;
            std::size_t next = 0;
        };
        std::vector<Frame> stack{{n, 0}};
        seen.insert(n);
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.node->parents.size()) {
                Node* p = f.node->parents[f.next++].node();
                if (p && p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }
    }

    NodePtr n_;
};

template <typename S>
Variable<S> constant(Tensor<S> t) {
    return Variable<S>(std::move(t), false);
}

template <typename S>
Variable<S> parameter(Tensor<S> t) {
    return Variable<S>(std::move(t), true);
}

template <typename S>
Variable<S> detach(const Variable<S>& v) {
    return Variable<S>(v.value(), false);
}

// --- elementwise / broadcast -------------------------------------------------

template <typename S>
Variable<S> add(const Variable<S>& a, const Variable<S>& b) {
    Tensor<S> out = broadcast_binary(a.value(), b.value(), [](S x, S y) { return x + y; });
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a, b},
        [a, b](Node& n) {
            a.accumulate_grad(reduce_to_shape(n.grad, a.shape()));
            b.accumulate_grad(reduce_to_shape(n.grad, b.shape()));
        },
        "add");
}

template <typename S>
Variable<S> sub(const Variable<S>& a, const Variable<S>& b) {
    Tensor<S> out = broadcast_binary(a.value(), b.value(), [](S x, S y) { return x - y; });
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a, b},
        [a, b](Node& n) {
            a.accumulate_grad(reduce_to_shape(n.grad, a.shape()));
            Tensor<S> gb = reduce_to_shape(n.grad, b.shape());
            gb.data = -gb.data;
            b.accumulate_grad(std::move(gb));
        },
        "sub");
}

template <typename S>
Variable<S> mul(const Variable<S>& a, const Variable<S>& b) {
    Tensor<S> out = broadcast_binary(a.value(), b.value(), [](S x, S y) { return x * y; });
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a, b},
        [a, b](Node& n) {
            if (a.requires_grad()) {
                Tensor<S> ga = broadcast_binary(n.grad, b.value(), [](S g, S y) { return g * y; });
                a.accumulate_grad(reduce_to_shape(ga, a.shape()));
            }
            if (b.requires_grad()) {
                Tensor<S> gb = broadcast_binary(n.grad, a.value(), [](S g, S x) { return g * x; });
                b.accumulate_grad(reduce_to_shape(gb, b.shape()));
            }
        },
        "mul");
}

template <typename S>
Variable<S> scale(const Variable<S>& a, S k) {
    Tensor<S> out = a.value();
    out.data *= k;
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a, k](Node& n) {
            Tensor<S> g = n.grad;
            g.data *= k;
            a.accumulate_grad(std::move(g));
        },
        "scale");
}

template <typename S>
Variable<S> add_scalar(const Variable<S>& a, S k) {
    Tensor<S> out = a.value();
    out.data += k;
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a}, [a](Node& n) { a.accumulate_grad(n.grad); }, "add_scalar");
}

template <typename S>
Variable<S> sqr(const Variable<S>& a) {
    Tensor<S> out = a.value();
    out.data = out.data.square();
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a](Node& n) {
            Tensor<S> g = n.grad;
            g.data *= S(2) * a.value().data;
            a.accumulate_grad(std::move(g));
        },
        "sqr");
}

template <typename S>
Variable<S> sqrt_v(const Variable<S>& a) {
    Tensor<S> out = a.value();
    out.data = out.data.sqrt();
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a](Node& n) {
            Tensor<S> g = n.grad;
            g.data = g.data * (S(0.5) / n.value.data);
            a.accumulate_grad(std::move(g));
        },
        "sqrt");
}

template <typename S>
Variable<S> tanh_v(const Variable<S>& a) {
    Tensor<S> out = a.value();
    out.data = out.data.tanh();
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a](Node& n) {
            Tensor<S> g = n.grad;
            g.data *= (S(1) - n.value.data.square());
            a.accumulate_grad(std::move(g));
        },
        "tanh");
}

template <typename S>
Variable<S> relu(const Variable<S>& a) {
    Tensor<S> out = a.value();
    out.data = out.data.max(S(0));
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a](Node& n) {
            Tensor<S> g = n.grad;
            g.data = (a.value().data > S(0)).select(g.data, S(0));
            a.accumulate_grad(std::move(g));
        },
        "relu");
}

template <typename S>
Variable<S> leaky_relu(const Variable<S>& a, S slope) {
    Tensor<S> out = a.value();
    out.data = (out.data > S(0)).select(out.data, out.data * slope);
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a, slope](Node& n) {
            Tensor<S> g = n.grad;
            g.data = (a.value().data > S(0)).select(g.data, g.data * slope);
            a.accumulate_grad(std::move(g));
        },
        "leaky_relu");
}

// --- reductions --------------------------------------------------------------

template <typename S>
Variable<S> mean_all(const Variable<S>& a) {
    const Eigen::Index n_elems = a.value().size();
    Tensor<S> out(Shape{1, 1, 1, 1});
    out.data[0] = a.value().data.sum() / static_cast<S>(n_elems);
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a, n_elems](Node& n) {
            Tensor<S> g(a.shape(), n.grad.data[0] / static_cast<S>(n_elems));
            a.accumulate_grad(std::move(g));
        },
        "mean_all");
}

/// Mean over spatial dims: (B,C,H,W) -> (B,C,1,1).
template <typename S>
Variable<S> mean_hw(const Variable<S>& a) {
    const Shape s = a.shape();
    const Eigen::Index hw = s.h * s.w;
    Tensor<S> out(Shape{s.b, s.c, 1, 1});
    for (Eigen::Index b = 0; b < s.b; ++b)
        for (Eigen::Index c = 0; c < s.c; ++c) {
            Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> plane(a.value().plane(b, c), hw);
            out.data[b * s.c + c] = plane.sum() / static_cast<S>(hw);
        }
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a},
        [a, s, hw](Node& n) {
            Tensor<S> g(s);
            for (Eigen::Index b = 0; b < s.b; ++b)
                for (Eigen::Index c = 0; c < s.c; ++c) {
                    const S gv = n.grad.data[b * s.c + c] / static_cast<S>(hw);
                    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(g.plane(b, c), hw).setConstant(gv);
                }
            a.accumulate_grad(std::move(g));
        },
        "mean_hw");
}

// --- structure ---------------------------------------------------------------

template <typename S>
Variable<S> concat_channels(const Variable<S>& a, const Variable<S>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.b != sb.b || sa.h != sb.h || sa.w != sb.w)
        throw InvalidArgument("concat_channels: mismatched shapes " + sa.str() + " vs " + sb.str());
    Tensor<S> out(Shape{sa.b, sa.c + sb.c, sa.h, sa.w});
    const Eigen::Index hw = sa.h * sa.w;
    for (Eigen::Index ib = 0; ib < sa.b; ++ib) {
        std::copy_n(a.value().plane(ib, 0), sa.c * hw, out.plane(ib, 0));
        std::copy_n(b.value().plane(ib, 0), sb.c * hw, out.plane(ib, sa.c));
    }
    using Node = typename Variable<S>::Node;
    return Variable<S>::make(
        std::move(out), {a, b},
        [a, b, sa, sb, hw](Node& n) {
            if (a.requires_grad()) {
                Tensor<S> ga(sa);
                for (Eigen::Index ib = 0; ib < sa.b; ++ib)
                    std::copy_n(n.grad.plane(ib, 0), sa.c * hw, ga.plane(ib, 0));
                a.accumulate_grad(std::move(ga));
            }
            if (b.requires_grad()) {
                Tensor<S> gb(sb);
                for (Eigen::Index ib = 0; ib < sb.b; ++ib)
                    std::copy_n(n.grad.plane(ib, sa.c), sb.c * hw, gb.plane(ib, 0));
                b.accumulate_grad(std::move(gb));
            }
        },
        "concat_channels");
}

}  // namespace rst
