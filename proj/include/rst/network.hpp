// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// The stylization generator: an initial strided encoder feeding two parallel
// paths -- a residual "shallow" path that keeps structure and a U-shaped
// "deep" path that carries learned texture/color -- linearly fused and
// decoded back to image resolution. Plus the patch discriminator.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rst/nn.hpp"

namespace rst {

enum class NormKind { Instance, None };

struct GeneratorSpec {
    int base_channels = 32;
    int downsample_factor = 4;  // power of two, realized as stride-2 convs
    int unet_depth = 2;
    NormKind norm_kind = NormKind::Instance;

    bool operator==(const GeneratorSpec&) const = default;

    void validate() const {
        if (base_channels < 8) throw InvalidArgument("generator spec: base_channels must be >= 8");
        if (downsample_factor != 2 && downsample_factor != 4 && downsample_factor != 8)
            throw InvalidArgument("generator spec: downsample_factor must be one of {2,4,8}");
        if (unet_depth < 1) throw InvalidArgument("generator spec: unet_depth must be >= 1");
    }

    /// Input H and W must be divisible by this.
    int required_multiple() const { return downsample_factor * (1 << unet_depth); }

    int encoder_stages() const {
        return downsample_factor == 2 ? 1 : (downsample_factor == 4 ? 2 : 3);
    }
};

struct FusionCoefficients {
    float alpha = 1.0f;  // shallow weight; the conventional setting keeps it at 1
    float beta = 1.0f;   // deep (texture) weight; swept at inference

    void validate() const {
        if (alpha < 0.0f || beta < 0.0f)
            throw InvalidArgument("fusion coefficients must be non-negative");
    }
};

template <typename S>
struct FeatureMapPair {
    Tensor<S> shallow;
    Tensor<S> deep;
};

/// Elementwise alpha*shallow + beta*deep. Endpoints return the untouched
/// operand so (1,0)/(0,1) are exact identities.
template <typename S>
Variable<S> fuse_features(const Variable<S>& shallow, const Variable<S>& deep,
                          FusionCoefficients coeffs) {
    coeffs.validate();
    if (!(shallow.shape() == deep.shape()))
        throw InvalidArgument("fuse: shallow/deep shapes differ: " + shallow.shape().str() +
                              " vs " + deep.shape().str());
    const S a = static_cast<S>(coeffs.alpha), b = static_cast<S>(coeffs.beta);
    if (b == S(0) && a == S(1)) return shallow;
    if (a == S(0) && b == S(1)) return deep;
    if (b == S(0)) return scale(shallow, a);
    if (a == S(0)) return scale(deep, b);
    return add(scale(shallow, a), scale(deep, b));
}

template <typename S>
Tensor<S> fuse(const FeatureMapPair<S>& pair, FusionCoefficients coeffs) {
    return fuse_features(constant(pair.shallow), constant(pair.deep), coeffs).value();
}

namespace detail {

enum class Act { ReLU, LeakyReLU, None };

template <typename S>
struct ConvBlock {
    Conv2dLayer<S> conv;
    InstanceNormLayer<S> norm;
    Act act = Act::ReLU;

    ConvBlock() = default;
    ConvBlock(int cin, int cout, int k, int stride, int pad, bool normed, Act act_, Rng& rng)
        : conv(cin, cout, k, stride, pad, rng), norm(cout, normed), act(act_) {}

    Variable<S> operator()(const Variable<S>& x) const {
        Variable<S> y = norm(conv(x));
        switch (act) {
            case Act::ReLU: return relu(y);
            case Act::LeakyReLU: return leaky_relu(y, S(0.2));
            case Act::None: return y;
        }
        return y;
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
        conv.collect(prefix + ".conv", out);
        norm.collect(prefix + ".norm", out);
    }
};

template <typename S>
struct ResBlock {
    Conv2dLayer<S> conv1, conv2;
    InstanceNormLayer<S> norm1, norm2;

    ResBlock() = default;
    ResBlock(int channels, bool normed, Rng& rng)
        : conv1(channels, channels, 3, 1, 1, rng),
          conv2(channels, channels, 3, 1, 1, rng),
          norm1(channels, normed),
          norm2(channels, normed) {}

    Variable<S> operator()(const Variable<S>& x) const {
        return add(x, norm2(conv2(relu(norm1(conv1(x))))));
    }

    void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
        conv1.collect(prefix + ".conv1", out);
        norm1.collect(prefix + ".norm1", out);
        conv2.collect(prefix + ".conv2", out);
        norm2.collect(prefix + ".norm2", out);
    }
};

}  // namespace detail

template <typename S = float>
class Generator {
public:
    Generator() = default;

    Generator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
        spec.validate();
        Rng rng(derive_seed(seed, 0x67656e));
        const bool normed = spec.norm_kind == NormKind::Instance;
        using detail::Act;

        // encoder: channel expansion + spatial reduction
        int c_in = 3;
        const int stages = spec.encoder_stages();
        for (int i = 0; i < stages; ++i) {
            const int c_out = std::max(2, spec.base_channels >> (stages - 1 - i));
            enc_.emplace_back(c_in, c_out, 3, 2, 1, normed, Act::ReLU, rng);
            c_in = c_out;
        }

        // shallow structure path
        shallow_.emplace_back(spec.base_channels, normed, rng);
        shallow_.emplace_back(spec.base_channels, normed, rng);

        // deep texture path: U-shaped with skip concatenation
        int c = spec.base_channels;
        for (int d = 0; d < spec.unet_depth; ++d) {
            down_.emplace_back(c, c * 2, 3, 2, 1, normed, Act::ReLU, rng);
            c *= 2;
        }
        bottleneck_ = detail::ResBlock<S>(c, normed, rng);
        for (int d = 0; d < spec.unet_depth; ++d) {
            UpStage stage;
            stage.shrink = detail::ConvBlock<S>(c, c / 2, 3, 1, 1, normed, Act::ReLU, rng);
            stage.merge = detail::ConvBlock<S>(c, c / 2, 3, 1, 1, normed, Act::ReLU, rng);
            up_.push_back(std::move(stage));
            c /= 2;
        }

        // decoder: upsample back to input resolution, bounded output
        c = spec.base_channels;
        for (int i = 0; i < stages; ++i) {
            const int c_out = std::max(4, c / 2);
            dec_.emplace_back(c, c_out, 3, 1, 1, normed, Act::ReLU, rng);
            c = c_out;
        }
        out_conv_ = Conv2dLayer<S>(c, 3, 3, 1, 1, rng);
    }

    const GeneratorSpec& spec() const { return spec_; }

    Variable<S> encode_initial(const Variable<S>& content) const {
        check_divisible(content.shape());
        if (content.shape().c != 3)
            throw InvalidArgument("encode_initial: expected 3 channels, got " +
                                  content.shape().str());
        Variable<S> f = content;
        for (const auto& block : enc_) f = block(f);
        return f;
    }

    Variable<S> shallow_path(const Variable<S>& feat) const {
        Variable<S> f = feat;
        for (const auto& block : shallow_) f = block(f);
        return f;
    }

    Variable<S> deep_path(const Variable<S>& feat) const {
        const int mult = 1 << spec_.unet_depth;
        if (feat.shape().h % mult != 0 || feat.shape().w % mult != 0)
            throw InvalidArgument("deep_path: spatial dims of " + feat.shape().str() +
                                  " must be divisible by " + std::to_string(mult));
        std::vector<Variable<S>> skips;
        Variable<S> f = feat;
        for (const auto& block : down_) {
            skips.push_back(f);
            f = block(f);
        }
        f = bottleneck_(f);
        for (std::size_t i = 0; i < up_.size(); ++i) {
            f = up_[i].shrink(upsample_nearest2(f));
            f = up_[i].merge(concat_channels(f, skips[skips.size() - 1 - i]));
        }
        return f;
    }

    /// Decoder: upsample by the encoder factor, project to RGB, tanh into [-1,1].
    Variable<S> decode(const Variable<S>& merged) const {
        Variable<S> f = merged;
        for (const auto& block : dec_) f = block(upsample_nearest2(f));
        Variable<S> y = tanh_v(out_conv_(f));
        y.mutable_value().range = ValueRange::Signed;
        return y;
    }

    /// Full pass on a unit-range image; output remapped to unit range.
    Variable<S> stylize_graph(const Variable<S>& content, FusionCoefficients coeffs = {}) const {
        coeffs.validate();
        if (content.value().range != ValueRange::Unit)
            throw InvalidArgument("stylize: content must be declared unit range");
        Variable<S> f = encode_initial(content);
        Variable<S> merged = fuse_features(shallow_path(f), deep_path(f), coeffs);
        Variable<S> signed_out = decode(merged);
        Variable<S> unit = scale(add_scalar(signed_out, S(1)), S(0.5));
        unit.mutable_value().range = ValueRange::Unit;
        return unit;
    }

    // Tensor-level entry points (inference).
    Tensor<S> encode_initial(const Tensor<S>& content) const {
        return encode_initial(constant(content)).value();
    }
    Tensor<S> shallow_path(const Tensor<S>& feat) const {
        return shallow_path(constant(feat)).value();
    }
    Tensor<S> deep_path(const Tensor<S>& feat) const { return deep_path(constant(feat)).value(); }
    Tensor<S> decode(const Tensor<S>& merged) const { return decode(constant(merged)).value(); }

    Tensor<S> stylize(const Tensor<S>& content, FusionCoefficients coeffs = {}) const {
        return stylize_graph(constant(content), coeffs).value();
    }

    /// [G(x), G(G(x)), ...] of length n.
    std::vector<Tensor<S>> iterate_stylize(const Tensor<S>& content, int n,
                                           FusionCoefficients coeffs = {}) const {
        if (n < 0) throw InvalidArgument("iterate_stylize: n must be >= 0");
        std::vector<Tensor<S>> iterates;
        Tensor<S> cur = content;
        for (int i = 0; i < n; ++i) {
            cur = stylize(cur, coeffs);
            iterates.push_back(cur);
        }
        return iterates;
    }

    std::vector<NamedParam<S>> parameters() const {
        std::vector<NamedParam<S>> out;
        for (std::size_t i = 0; i < enc_.size(); ++i)
            enc_[i].collect("enc." + std::to_string(i), out);
        for (std::size_t i = 0; i < shallow_.size(); ++i)
            shallow_[i].collect("shallow." + std::to_string(i), out);
        for (std::size_t i = 0; i < down_.size(); ++i)
            down_[i].collect("deep.down." + std::to_string(i), out);
        bottleneck_.collect("deep.bottleneck", out);
        for (std::size_t i = 0; i < up_.size(); ++i) {
            up_[i].shrink.collect("deep.up." + std::to_string(i) + ".shrink", out);
            up_[i].merge.collect("deep.up." + std::to_string(i) + ".merge", out);
        }
        for (std::size_t i = 0; i < dec_.size(); ++i)
            dec_[i].collect("dec." + std::to_string(i), out);
        out_conv_.collect("out_conv", out);
        return out;
    }

    /// Parameters of the deep (U-shaped) path only; used to verify that the
    /// beta=0 endpoint is independent of them.
    std::vector<NamedParam<S>> deep_parameters() const {
        std::vector<NamedParam<S>> out;
        for (std::size_t i = 0; i < down_.size(); ++i)
            down_[i].collect("deep.down." + std::to_string(i), out);
        bottleneck_.collect("deep.bottleneck", out);
        for (std::size_t i = 0; i < up_.size(); ++i) {
            up_[i].shrink.collect("deep.up." + std::to_string(i) + ".shrink", out);
            up_[i].merge.collect("deep.up." + std::to_string(i) + ".merge", out);
        }
        return out;
    }

private:
    void check_divisible(const Shape& s) const {
        const int mult = spec_.required_multiple();
        if (s.h % mult != 0 || s.w % mult != 0)
            throw InvalidArgument("input dims " + s.str() + " must be divisible by " +
                                  std::to_string(mult));
    }

    struct UpStage {
        detail::ConvBlock<S> shrink;  // after upsample: channels halved
        detail::ConvBlock<S> merge;   // after skip concat: back to level width
    };

    GeneratorSpec spec_;
    std::vector<detail::ConvBlock<S>> enc_;
    std::vector<detail::ResBlock<S>> shallow_;
    std::vector<detail::ConvBlock<S>> down_;
    detail::ResBlock<S> bottleneck_;
    std::vector<UpStage> up_;
    std::vector<detail::ConvBlock<S>> dec_;
    Conv2dLayer<S> out_conv_;
};

/// Strided-convolution patch discriminator; scores on a (B,1,H/16,W/16) grid.
template <typename S = float>
class Discriminator {
public:
    Discriminator() = default;

    explicit Discriminator(std::uint64_t seed, int base_channels = 32) {
        Rng rng(derive_seed(seed, 0x64697363));
        using detail::Act;
        int c = base_channels;
        layers_.emplace_back(3, c, 4, 2, 1, false, Act::LeakyReLU, rng);
        for (int i = 0; i < 3; ++i) {
            layers_.emplace_back(c, c * 2, 4, 2, 1, true, Act::LeakyReLU, rng);
            c *= 2;
        }
        score_conv_ = Conv2dLayer<S>(c, 1, 3, 1, 1, rng);
    }

    Variable<S> discriminate(const Variable<S>& img) const {
        if (img.shape().c != 3)
            throw InvalidArgument("discriminate: expected 3 channels, got " + img.shape().str());
        if (img.shape().h < 16 || img.shape().w < 16)
            throw InvalidArgument("discriminate: spatial dims must be >= 16, got " +
                                  img.shape().str());
        Variable<S> f = img;
        for (const auto& layer : layers_) f = layer(f);
        return conv2d(f, score_conv_.weight, score_conv_.bias, 1, 1);
    }

    Tensor<S> discriminate(const Tensor<S>& img) const {
        return discriminate(constant(img)).value();
    }

    std::vector<NamedParam<S>> parameters() const {
        std::vector<NamedParam<S>> out;
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i].collect("layer." + std::to_string(i), out);
        score_conv_.collect("score", out);
        return out;
    }

private:
    std::vector<detail::ConvBlock<S>> layers_;
    Conv2dLayer<S> score_conv_;
};

}  // namespace rst
