// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training signals: perceptual content loss, mean/std feature-statistics
// style loss, least-squares adversarial terms, and the edge-weighted MSE
// content loss, combined into a LossBundle.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rst/network.hpp"

namespace rst {

/// Coefficients of the combined training objective.
struct LossWeights {
    double content = 1.0;
    double style = 10.0;
    double adversarial = 1.0;
    double weighted_mse = 50.0;

    void validate() const {
        if (content < 0 || style < 0 || adversarial < 0 || weighted_mse < 0)
            throw InvalidArgument("loss weights must be non-negative");
    }
};

/// Named scalar losses plus their weighted total.
struct LossBundle {
    double content = 0.0;
    double style = 0.0;
    double adversarial = 0.0;
    double weighted_mse = 0.0;
    double total = 0.0;
    LossWeights weights;

    bool all_finite() const {
        return std::isfinite(content) && std::isfinite(style) && std::isfinite(adversarial) &&
               std::isfinite(weighted_mse) && std::isfinite(total);
    }
};

/// Frozen VGG-style feature stack tapped at the first convolution of each of
/// its four stages. Weights come either from an archive on disk or from a
/// seeded random init (offline mode); they never train.
template <typename S = float>
class PerceptualExtractor {
public:
    struct LayerPlan {
        int out_channels;
        bool pool_before;
        bool tap;
        const char* tag;
    };

    PerceptualExtractor() = default;  // unloaded; using it raises StateError

    /// Deterministic random-weight extractor ("offline test mode").
    /// Default widths are a quarter of the classification-pretrained stack;
    /// the layer layout and tap points are identical.
    static PerceptualExtractor random_init(std::uint64_t seed,
                                           std::vector<int> stage_widths = {16, 32, 64, 128}) {
        PerceptualExtractor e;
        e.stage_widths_ = std::move(stage_widths);
        Rng rng(derive_seed(seed, 0x76676719));
        int cin = 3;
        for (const LayerPlan& plan : plans(e.stage_widths_)) {
            Layer layer;
            layer.pool_before = plan.pool_before;
            layer.tap = plan.tap;
            layer.tag = plan.tag;
            const S stddev = static_cast<S>(std::sqrt(2.0 / (9.0 * cin)));
            layer.weight = constant(Tensor<S>::random_normal(Shape{plan.out_channels, cin, 3, 3},
                                                             rng, stddev));
            layer.bias = constant(Tensor<S>::zeros(Shape{1, plan.out_channels, 1, 1}));
            e.layers_.push_back(std::move(layer));
            cin = plan.out_channels;
        }
        e.loaded_ = true;
        return e;
    }

    /// Rebuild from named weight tensors (e.g. a converted pretrained stack).
    /// Stage widths are inferred from the tensors themselves.
    static PerceptualExtractor from_weights(
        const std::vector<std::pair<std::string, Tensor<S>>>& entries) {
        auto find = [&](const std::string& name) -> const Tensor<S>& {
            for (const auto& [n, t] : entries)
                if (n == name) return t;
            throw CorruptCheckpoint("extractor weights: missing tensor " + name);
        };
        std::vector<int> widths = {
            static_cast<int>(find("relu1_1.weight").shape.b),
            static_cast<int>(find("relu2_1.weight").shape.b),
            static_cast<int>(find("relu3_1.weight").shape.b),
            static_cast<int>(find("relu4_1.weight").shape.b),
        };
        PerceptualExtractor e;
        e.stage_widths_ = widths;
        int cin = 3;
        for (const LayerPlan& plan : plans(widths)) {
            Layer layer;
            layer.pool_before = plan.pool_before;
            layer.tap = plan.tap;
            layer.tag = plan.tag;
            const Tensor<S>& w = find(std::string(plan.tag) + ".weight");
            const Tensor<S>& b = find(std::string(plan.tag) + ".bias");
            if (w.shape.b != plan.out_channels || w.shape.c != cin || w.shape.h != 3 ||
                w.shape.w != 3 || b.shape.c != plan.out_channels)
                throw CorruptCheckpoint("extractor weights: bad shape for " +
                                        std::string(plan.tag));
            layer.weight = constant(w);
            layer.bias = constant(b);
            e.layers_.push_back(std::move(layer));
            cin = plan.out_channels;
        }
        e.loaded_ = true;
        return e;
    }

    bool loaded() const { return loaded_; }

    std::vector<std::string> layer_tags() const {
        std::vector<std::string> tags;
        for (const auto& l : layers_)
            if (l.tap) tags.push_back(l.tag);
        return tags;
    }

    const std::vector<int>& stage_widths() const { return stage_widths_; }

    /// One feature map per tap point, in tap order. Input must be unit-range RGB.
    std::vector<Variable<S>> features(const Variable<S>& img) const {
        require_loaded();
        if (img.shape().c != 3)
            throw InvalidArgument("perceptual features: expected 3 channels, got " +
                                  img.shape().str());
        Variable<S> f = normalize_input(img);
        std::vector<Variable<S>> taps;
        for (const auto& layer : layers_) {
            if (layer.pool_before) f = max_pool2(f);
            f = relu(conv2d(f, layer.weight, layer.bias, 1, 1));
            if (layer.tap) taps.push_back(f);
        }
        return taps;
    }

    std::vector<Tensor<S>> features(const Tensor<S>& img) const {
        std::vector<Tensor<S>> out;
        for (auto& v : features(constant(img))) out.push_back(v.value());
        return out;
    }

    /// Feature map at the deepest tap (the content tap).
    Variable<S> content_features(const Variable<S>& img) const {
        auto taps = features(img);
        return taps.back();
    }

    // Direct weight access for serialization; order matches plans().
    std::vector<NamedParam<S>> weight_entries() const {
        require_loaded();
        std::vector<NamedParam<S>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            out.push_back({std::string(layers_[i].tag_name()) + ".weight", layers_[i].weight});
            out.push_back({std::string(layers_[i].tag_name()) + ".bias", layers_[i].bias});
        }
        return out;
    }

    static std::vector<LayerPlan> plans(const std::vector<int>& widths) {
        if (widths.size() != 4) throw InvalidArgument("extractor: need 4 stage widths");
        return {
            {widths[0], false, true, "relu1_1"}, {widths[0], false, false, "conv1_2"},
            {widths[1], true, true, "relu2_1"},  {widths[1], false, false, "conv2_2"},
            {widths[2], true, true, "relu3_1"},  {widths[2], false, false, "conv3_2"},
            {widths[2], false, false, "conv3_3"}, {widths[2], false, false, "conv3_4"},
            {widths[3], true, true, "relu4_1"},
        };
    }

private:
    struct Layer {
        Variable<S> weight, bias;
        bool pool_before = false;
        bool tap = false;
        const char* tag = "";
        const char* tag_name() const { return tag; }
    };

    void require_loaded() const {
        if (!loaded_) throw StateError("perceptual extractor has no weights loaded");
    }

    Variable<S> normalize_input(const Variable<S>& img) const {
        // channel statistics of the classification pretraining corpus
        static const double mean[3] = {0.485, 0.456, 0.406};
        static const double stddev[3] = {0.229, 0.224, 0.225};
        Tensor<S> m(Shape{1, 3, 1, 1}), inv(Shape{1, 3, 1, 1});
        for (int c = 0; c < 3; ++c) {
            m.data[c] = static_cast<S>(mean[c]);
            inv.data[c] = static_cast<S>(1.0 / stddev[c]);
        }
        return mul(sub(img, constant(std::move(m))), constant(std::move(inv)));
    }

    std::vector<Layer> layers_;
    std::vector<int> stage_widths_;
    bool loaded_ = false;
};

// --- feature statistics -------------------------------------------------------

/// Per-channel spatial standard deviation: (B,C,H,W) -> (B,C,1,1).
template <typename S>
Variable<S> channel_std(const Variable<S>& f, S eps = S(1e-5)) {
    Variable<S> mu = mean_hw(f);
    return sqrt_v(add_scalar(mean_hw(sqr(sub(f, mu))), eps));
}

/// Precomputed target statistics of the fixed style image.
template <typename S>
struct StyleStats {
    std::vector<Tensor<S>> mean;    // (1,C,1,1) per tap
    std::vector<Tensor<S>> stddev;  // (1,C,1,1) per tap
};

template <typename S>
StyleStats<S> style_statistics(const Tensor<S>& style, const PerceptualExtractor<S>& extractor) {
    StyleStats<S> stats;
    for (const auto& f : extractor.features(constant(style))) {
        stats.mean.push_back(mean_hw(f).value());
        stats.stddev.push_back(channel_std(f).value());
    }
    return stats;
}

// --- loss terms ----------------------------------------------------------------

/// Mean squared feature difference at the content tap.
template <typename S>
Variable<S> content_loss(const Variable<S>& output, const Variable<S>& content,
                         const PerceptualExtractor<S>& extractor) {
    if (!(output.shape() == content.shape()))
        throw InvalidArgument("content_loss: shape mismatch " + output.shape().str() + " vs " +
                              content.shape().str());
    Variable<S> fo = extractor.content_features(output);
    Variable<S> fc = detach(extractor.content_features(detach(content)));
    return mean_all(sqr(sub(fo, fc)));
}

template <typename S>
double content_loss(const Tensor<S>& output, const Tensor<S>& content,
                    const PerceptualExtractor<S>& extractor) {
    return static_cast<double>(
        content_loss(constant(output), constant(content), extractor).value().data[0]);
}

/// Sum over taps of squared gaps in per-channel feature means and stds
/// (each gap averaged over channels and batch).
template <typename S>
Variable<S> style_loss(const Variable<S>& output, const StyleStats<S>& target,
                       const PerceptualExtractor<S>& extractor) {
    auto taps = extractor.features(output);
    if (taps.size() != target.mean.size())
        throw InvalidArgument("style_loss: target statistics do not match extractor taps");
    Variable<S> loss;
    for (std::size_t i = 0; i < taps.size(); ++i) {
        Variable<S> mean_gap = mean_all(sqr(sub(mean_hw(taps[i]), constant(target.mean[i]))));
        Variable<S> std_gap = mean_all(sqr(sub(channel_std(taps[i]), constant(target.stddev[i]))));
        Variable<S> term = add(mean_gap, std_gap);
        loss = loss.defined() ? add(loss, term) : term;
    }
    return loss;
}

template <typename S>
double style_loss(const Tensor<S>& output, const Tensor<S>& style,
                  const PerceptualExtractor<S>& extractor) {
    StyleStats<S> stats = style_statistics(style, extractor);
    return static_cast<double>(style_loss(constant(output), stats, extractor).value().data[0]);
}

/// Style distance between two precomputed tap-feature lists; exposed so the
/// statistic itself is testable without an extractor.
template <typename S>
double style_loss_from_features(const std::vector<Tensor<S>>& a, const std::vector<Tensor<S>>& b) {
    if (a.size() != b.size()) throw InvalidArgument("style_loss_from_features: arity mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        Variable<S> fa = constant(a[i]), fb = constant(b[i]);
        double mg = static_cast<double>(
            mean_all(sqr(sub(mean_hw(fa), mean_hw(fb)))).value().data[0]);
        double sg = static_cast<double>(
            mean_all(sqr(sub(channel_std(fa), channel_std(fb)))).value().data[0]);
        loss += mg + sg;
    }
    return loss;
}

/// Mean over all pixels and channels of wmap * (output - content)^2; the
/// single-channel map broadcasts across RGB.
template <typename S>
Variable<S> weighted_mse_loss(const Variable<S>& output, const Variable<S>& content,
                              const EdgeWeightMap& wmap) {
    if (!(output.shape() == content.shape()))
        throw InvalidArgument("weighted_mse_loss: output/content shapes differ: " +
                              output.shape().str() + " vs " + content.shape().str());
    const Shape& ws = wmap.weights.shape;
    const Shape& os = output.shape();
    if (ws.c != 1 || ws.b != os.b || ws.h != os.h || ws.w != os.w)
        throw InvalidArgument("weighted_mse_loss: weight map shape " + ws.str() +
                              " does not match output " + os.str());
    Variable<S> w = constant(wmap.weights.template cast<S>());
    return mean_all(mul(w, sqr(sub(output, content))));
}

template <typename S>
double weighted_mse_loss(const Tensor<S>& output, const Tensor<S>& content,
                         const EdgeWeightMap& wmap) {
    return static_cast<double>(
        weighted_mse_loss(constant(output), constant(content), wmap).value().data[0]);
}

/// Least-squares discriminator objective: 1/2 E(real-1)^2 + 1/2 E(fake)^2.
template <typename S>
Variable<S> adversarial_loss_d(const Variable<S>& real_scores, const Variable<S>& fake_scores) {
    Variable<S> real_term = mean_all(sqr(add_scalar(real_scores, S(-1))));
    Variable<S> fake_term = mean_all(sqr(fake_scores));
    return scale(add(real_term, fake_term), S(0.5));
}

template <typename S>
double adversarial_loss_d(const Tensor<S>& real_scores, const Tensor<S>& fake_scores) {
    return static_cast<double>(
        adversarial_loss_d(constant(real_scores), constant(fake_scores)).value().data[0]);
}

/// Least-squares generator objective: 1/2 E(fake-1)^2.
template <typename S>
Variable<S> adversarial_loss_g(const Variable<S>& fake_scores) {
    return scale(mean_all(sqr(add_scalar(fake_scores, S(-1)))), S(0.5));
}

template <typename S>
double adversarial_loss_g(const Tensor<S>& fake_scores) {
    return static_cast<double>(adversarial_loss_g(constant(fake_scores)).value().data[0]);
}

// --- combination ----------------------------------------------------------------

template <typename S>
struct TotalLoss {
    Variable<S> total;  // scalar graph root for backward
    LossBundle bundle;
};

/// Assemble scalar loss terms into the weighted total and its report.
template <typename S>
TotalLoss<S> combine_losses(const Variable<S>& c, const Variable<S>& s, const Variable<S>& a,
                            const Variable<S>& w, const LossWeights& weights) {
    weights.validate();
    Variable<S> total = scale(c, static_cast<S>(weights.content));
    total = add(total, scale(s, static_cast<S>(weights.style)));
    total = add(total, scale(a, static_cast<S>(weights.adversarial)));
    total = add(total, scale(w, static_cast<S>(weights.weighted_mse)));

    TotalLoss<S> out;
    out.total = total;
    out.bundle.content = static_cast<double>(c.value().data[0]);
    out.bundle.style = static_cast<double>(s.value().data[0]);
    out.bundle.adversarial = static_cast<double>(a.value().data[0]);
    out.bundle.weighted_mse = static_cast<double>(w.value().data[0]);
    out.bundle.weights = weights;
    out.bundle.total = weights.content * out.bundle.content + weights.style * out.bundle.style +
                       weights.adversarial * out.bundle.adversarial +
                       weights.weighted_mse * out.bundle.weighted_mse;
    return out;
}

/// Weighted combination of all four terms. The graph total and the reported
/// bundle total are formed by the same left-to-right sum.
template <typename S>
TotalLoss<S> total_loss_graph(const Variable<S>& output, const Variable<S>& content,
                              const StyleStats<S>& style_target, const EdgeWeightMap& wmap,
                              const Variable<S>& fake_scores, const LossWeights& weights,
                              const PerceptualExtractor<S>& extractor) {
    Variable<S> c = content_loss(output, content, extractor);
    Variable<S> s = style_loss(output, style_target, extractor);
    Variable<S> a = adversarial_loss_g(fake_scores);
    Variable<S> w = weighted_mse_loss(output, content, wmap);
    return combine_losses(c, s, a, w, weights);
}

template <typename S>
LossBundle total_loss(const Tensor<S>& output, const Tensor<S>& content, const Tensor<S>& style,
                      const EdgeWeightMap& wmap, const Tensor<S>& fake_scores,
                      const LossWeights& weights, const PerceptualExtractor<S>& extractor) {
    StyleStats<S> stats = style_statistics(style, extractor);
    return total_loss_graph(constant(output), constant(content), stats, wmap,
                            constant(fake_scores), weights, extractor)
        .bundle;
}

}  // namespace rst
