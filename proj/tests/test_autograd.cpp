// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference validation of every differentiable op, in double
// precision, plus end-to-end checks through the generator, discriminator
// and loss stack.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rst/losses.hpp"
#include "rst/network.hpp"
#include "rst/nn.hpp"
#include "support.hpp"

using namespace rst;
using rst::testing::grad_check;
using rst::testing::probe_scalar;
using rst::testing::rand_tensor;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("elementwise ops match finite differences") {
    Variable<double> a(rand_tensor({2, 3, 4, 5}, 1), true);
    Variable<double> b(rand_tensor({2, 3, 4, 5}, 2), true);

    CHECK(grad_check([&] { return probe_scalar(add(a, b)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(sub(a, b)); }, b) < kTol);
    CHECK(grad_check([&] { return probe_scalar(mul(a, b)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(mul(a, b)); }, b) < kTol);
    CHECK(grad_check([&] { return probe_scalar(scale(a, 2.5)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(add_scalar(a, -0.7)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(sqr(a)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(tanh_v(a)); }, a) < kTol);
}

TEST_CASE("broadcast ops reduce gradients onto the small operand") {
    Variable<double> x(rand_tensor({2, 3, 4, 4}, 3), true);
    Variable<double> cvec(rand_tensor({1, 3, 1, 1}, 4), true);
    Variable<double> map(rand_tensor({2, 1, 4, 4}, 5), true);

    CHECK(grad_check([&] { return probe_scalar(mul(x, cvec)); }, cvec) < kTol);
    CHECK(grad_check([&] { return probe_scalar(mul(x, cvec)); }, x) < kTol);
    CHECK(grad_check([&] { return probe_scalar(add(x, map)); }, map) < kTol);
    CHECK(grad_check([&] { return probe_scalar(mul(map, sqr(x))); }, x) < kTol);
}

TEST_CASE("sqrt and activations away from kinks") {
    Variable<double> pos(rand_tensor({1, 2, 3, 3}, 6, 0.5, 2.0), true);
    CHECK(grad_check([&] { return probe_scalar(sqrt_v(pos)); }, pos) < kTol);

    // keep all magnitudes above the FD step so relu/lrelu kinks are not crossed
    Tensor<double> t = rand_tensor({1, 2, 5, 5}, 7);
    for (Eigen::Index i = 0; i < t.size(); ++i)
        if (std::abs(t.data[i]) < 0.05) t.data[i] = 0.1;
    Variable<double> v(t, true);
    CHECK(grad_check([&] { return probe_scalar(relu(v)); }, v) < kTol);
    CHECK(grad_check([&] { return probe_scalar(leaky_relu(v, 0.2)); }, v) < kTol);
}

TEST_CASE("reductions") {
    Variable<double> x(rand_tensor({2, 4, 3, 5}, 8), true);
    CHECK(grad_check([&] { return mean_all(x); }, x) < kTol);
    CHECK(grad_check([&] { return probe_scalar(mean_hw(x)); }, x) < kTol);
    CHECK(grad_check([&] { return probe_scalar(channel_std(x)); }, x) < kTol);
}

TEST_CASE("concat splits gradients") {
    Variable<double> a(rand_tensor({2, 2, 3, 3}, 9), true);
    Variable<double> b(rand_tensor({2, 3, 3, 3}, 10), true);
    CHECK(grad_check([&] { return probe_scalar(concat_channels(a, b)); }, a) < kTol);
    CHECK(grad_check([&] { return probe_scalar(concat_channels(a, b)); }, b) < kTol);
}

TEST_CASE("conv2d gradients: input, weight, bias") {
    Variable<double> x(rand_tensor({2, 3, 6, 6}, 11), true);
    Variable<double> w(rand_tensor({4, 3, 3, 3}, 12, -0.5, 0.5), true);
    Variable<double> bias(rand_tensor({1, 4, 1, 1}, 13, -0.2, 0.2), true);

    SUBCASE("stride 1, pad 1") {
        auto f = [&] { return probe_scalar(conv2d(x, w, bias, 1, 1)); };
        CHECK(grad_check(f, x) < kTol);
        CHECK(grad_check(f, w) < kTol);
        CHECK(grad_check(f, bias) < kTol);
    }
    SUBCASE("stride 2, pad 1") {
        auto f = [&] { return probe_scalar(conv2d(x, w, bias, 2, 1)); };
        CHECK(grad_check(f, x) < kTol);
        CHECK(grad_check(f, w) < kTol);
    }
    SUBCASE("4x4 kernel, stride 2 (discriminator shape)") {
        Variable<double> w4(rand_tensor({2, 3, 4, 4}, 14, -0.4, 0.4), true);
        Variable<double> b4(rand_tensor({1, 2, 1, 1}, 15), true);
        Variable<double> x8(rand_tensor({1, 3, 8, 8}, 16), true);
        auto f = [&] { return probe_scalar(conv2d(x8, w4, b4, 2, 1)); };
        CHECK(grad_check(f, x8) < kTol);
        CHECK(grad_check(f, w4) < kTol);
    }
}

TEST_CASE("conv2d shape checks") {
    Variable<double> x(rand_tensor({1, 3, 6, 6}, 17), false);
    Variable<double> w(rand_tensor({4, 2, 3, 3}, 18), false);
    Variable<double> b(rand_tensor({1, 4, 1, 1}, 19), false);
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 1), InvalidArgument);
}

TEST_CASE("instance_norm gradients") {
    Variable<double> x(rand_tensor({2, 3, 4, 4}, 20), true);
    Variable<double> gamma(rand_tensor({1, 3, 1, 1}, 21, 0.5, 1.5), true);
    Variable<double> beta(rand_tensor({1, 3, 1, 1}, 22), true);
    auto f = [&] { return probe_scalar(instance_norm(x, gamma, beta)); };
    CHECK(grad_check(f, x, 1e-5) < 1e-5);
    CHECK(grad_check(f, gamma) < kTol);
    CHECK(grad_check(f, beta) < kTol);
}

TEST_CASE("max_pool2 and upsample gradients") {
    // spread values so pooling argmax is stable under the FD step
    Tensor<double> t({1, 2, 6, 6});
    Rng rng(23);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = rng.uniform(0, 1) + 0.3 * (i % 7);
    Variable<double> x(t, true);
    CHECK(grad_check([&] { return probe_scalar(max_pool2(x)); }, x) < kTol);

    Variable<double> y(rand_tensor({2, 3, 3, 3}, 24), true);
    CHECK(grad_check([&] { return probe_scalar(upsample_nearest2(y)); }, y) < kTol);
}

TEST_CASE("gradient accumulates across reuse of the same variable") {
    Variable<double> x(rand_tensor({1, 1, 2, 2}, 25), true);
    // f = mean(x*x + x), uses x twice on distinct paths
    auto f = [&] { return mean_all(add(mul(x, x), x)); };
    CHECK(grad_check(f, x) < kTol);
}

TEST_CASE("detach blocks gradient flow") {
    Variable<double> x(rand_tensor({1, 1, 3, 3}, 26), true);
    Variable<double> loss = mean_all(mul(detach(x), x));
    loss.backward();
    // d/dx of mean(c*x) where c = detached copy: grad is c/n, not 2x/n
    const Tensor<double>& g = x.grad();
    for (Eigen::Index i = 0; i < g.size(); ++i)
        CHECK(g.data[i] == doctest::Approx(x.value().data[i] / 9.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
    Variable<double> x(rand_tensor({1, 1, 2, 2}, 27), true);
    Variable<double> y = sqr(x);
    CHECK_THROWS_AS(y.backward(), InvalidArgument);
}

TEST_CASE("generator end-to-end input gradient") {
    GeneratorSpec spec;
    spec.base_channels = 8;
    spec.downsample_factor = 2;
    spec.unet_depth = 1;
    Generator<double> gen(spec, 31);
    Variable<double> x(rand_tensor({1, 3, 8, 8}, 32, 0.05, 0.95), true);
    auto f = [&] { return probe_scalar(gen.stylize_graph(x)); };
    CHECK(grad_check(f, x, 1e-5, 40) < 1e-5);
}

TEST_CASE("generator parameter gradients via finite differences") {
    GeneratorSpec spec;
    spec.base_channels = 8;
    spec.downsample_factor = 2;
    spec.unet_depth = 1;
    Generator<double> gen(spec, 33);
    Variable<double> x(rand_tensor({1, 3, 8, 8}, 34, 0.05, 0.95), false);
    auto f = [&] { return probe_scalar(gen.stylize_graph(x)); };
    auto params = gen.parameters();
    // spot-check one tensor from each region of the network
    for (const std::string& name :
         {std::string("enc.0.conv.weight"), std::string("shallow.1.conv2.weight"),
          std::string("deep.up.0.merge.conv.weight"), std::string("dec.0.norm.gamma"),
          std::string("out_conv.bias")}) {
        bool found = false;
        for (auto& p : params)
            if (p.name == name) {
                found = true;
                CHECK_MESSAGE(grad_check(f, p.var, 1e-5, 10) < 1e-5, name);
            }
        CHECK_MESSAGE(found, "missing parameter ", name);
    }
}

TEST_CASE("discriminator end-to-end input gradient") {
    Discriminator<double> disc(35, 8);
    Variable<double> x(rand_tensor({1, 3, 16, 16}, 36, 0.05, 0.95), true);
    auto f = [&] { return adversarial_loss_g(disc.discriminate(x)); };
    CHECK(grad_check(f, x, 1e-5, 40) < 1e-5);
}

TEST_CASE("perceptual losses end-to-end input gradient") {
    auto extractor = PerceptualExtractor<double>::random_init(37, {4, 6, 8, 10});
    Variable<double> out(rand_tensor({1, 3, 16, 16}, 38, 0.1, 0.9), true);
    Variable<double> content(rand_tensor({1, 3, 16, 16}, 39, 0.1, 0.9), false);
    Tensor<double> style_img = rand_tensor({1, 3, 16, 16}, 40, 0.1, 0.9);
    StyleStats<double> stats = style_statistics(style_img, extractor);

    CHECK(grad_check([&] { return content_loss(out, content, extractor); }, out, 1e-5, 30) < 1e-5);
    CHECK(grad_check([&] { return style_loss(out, stats, extractor); }, out, 1e-5, 30) < 1e-5);
}
