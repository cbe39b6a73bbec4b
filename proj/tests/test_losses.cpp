// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "rst/imaging.hpp"
#include "rst/losses.hpp"
#include "support.hpp"

using namespace rst;
using rst::testing::grad_check;
using rst::testing::rand_tensor;
using rst::testing::rand_tensor_f;

namespace {

PerceptualExtractor<float> test_extractor(std::uint64_t seed = 41) {
    return PerceptualExtractor<float>::random_init(seed);
}

EdgeWeightMap map_from(Tensor<float> w) {
    EdgeWeightMap m;
    m.source_h = w.shape.h;
    m.source_w = w.shape.w;
    m.weights = std::move(w);
    return m;
}

}  // namespace

TEST_CASE("perceptual_features: arity, determinism, tap geometry") {
    auto ex = test_extractor();
    CHECK(ex.layer_tags() == std::vector<std::string>{"relu1_1", "relu2_1", "relu3_1", "relu4_1"});

    Tensor<float> img = rand_tensor_f({1, 3, 64, 64}, 1);
    auto taps = ex.features(img);
    REQUIRE(taps.size() == 4);
    CHECK(taps[0].shape.h == 64);
    CHECK(taps[1].shape.h == 32);
    // tap after two stride-2 stages: 64 -> 16
    CHECK(taps[2].shape == Shape{1, 64, 16, 16});
    CHECK(taps[3].shape.h == 8);

    auto again = ex.features(img);
    for (std::size_t i = 0; i < taps.size(); ++i)
        CHECK((taps[i].data - again[i].data).abs().maxCoeff() == 0.0f);
}

TEST_CASE("unloaded extractor raises StateError") {
    PerceptualExtractor<float> empty;
    Tensor<float> img = rand_tensor_f({1, 3, 16, 16}, 2);
    CHECK_THROWS_AS(empty.features(img), StateError);
}

TEST_CASE("extractor weights are frozen: no gradient reaches them") {
    auto ex = test_extractor();
    Variable<float> img(rand_tensor_f({1, 3, 16, 16}, 3), true);
    Variable<float> loss = mean_all(sqr(ex.features(img)[3]));
    loss.backward();
    CHECK(img.grad().data.abs().maxCoeff() > 0.0f);
    for (const auto& e : ex.weight_entries()) CHECK_FALSE(e.var.requires_grad());
}

TEST_CASE("content_loss: zero at identity, symmetric, matches plain recompute") {
    auto ex = test_extractor();
    Tensor<float> a = rand_tensor_f({1, 3, 16, 16}, 4);
    Tensor<float> b = rand_tensor_f({1, 3, 16, 16}, 5);

    CHECK(content_loss(a, a, ex) == doctest::Approx(0.0).epsilon(1e-7));
    CHECK(content_loss(a, b, ex) == doctest::Approx(content_loss(b, a, ex)).epsilon(1e-6));

    // plain second implementation: elementwise mean of squared residuals at
    // the deepest tap
    auto fa = ex.features(a).back();
    auto fb = ex.features(b).back();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < fa.size(); ++i) {
        const double d = static_cast<double>(fa.data[i]) - fb.data[i];
        acc += d * d;
    }
    acc /= fa.size();
    CHECK(content_loss(a, b, ex) == doctest::Approx(acc).epsilon(1e-5));
}

TEST_CASE("style_loss: zero for the same image") {
    auto ex = test_extractor();
    Tensor<float> img = rand_tensor_f({1, 3, 32, 32}, 6);
    CHECK(style_loss(img, img, ex) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("style statistics are invariant to spatial shuffling of features") {
    auto ex = test_extractor();
    auto feats = ex.features(rand_tensor_f({1, 3, 32, 32}, 7));
    auto shuffled = feats;
    Rng rng(8);
    for (auto& f : shuffled)
        for (Eigen::Index b = 0; b < f.shape.b; ++b)
            for (Eigen::Index c = 0; c < f.shape.c; ++c) {
                float* p = f.plane(b, c);
                std::shuffle(p, p + f.shape.h * f.shape.w, rng.engine());
            }
    CHECK(style_loss_from_features(feats, shuffled) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("style_loss matches a plain recomputation of channel stats") {
    auto ex = test_extractor();
    Tensor<float> out = rand_tensor_f({1, 3, 32, 32}, 9);
    Tensor<float> sty = rand_tensor_f({1, 3, 24, 24}, 10);  // style may differ in H,W

    auto fo = ex.features(out);
    auto fs = ex.features(sty);
    double expected = 0.0;
    for (std::size_t t = 0; t < fo.size(); ++t) {
        const Eigen::Index c_count = fo[t].shape.c;
        double mean_gap = 0.0, std_gap = 0.0;
        for (Eigen::Index c = 0; c < c_count; ++c) {
            auto stats = [](const Tensor<float>& f, Eigen::Index cc) {
                const Eigen::Index hw = f.shape.h * f.shape.w;
                double mu = 0.0;
                for (Eigen::Index i = 0; i < hw; ++i) mu += f.plane(0, cc)[i];
                mu /= hw;
                double var = 0.0;
                for (Eigen::Index i = 0; i < hw; ++i) {
                    const double d = f.plane(0, cc)[i] - mu;
                    var += d * d;
                }
                var /= hw;
                return std::make_pair(mu, std::sqrt(var + 1e-5));
            };
            auto [mo, so] = stats(fo[t], c);
            auto [ms, ss] = stats(fs[t], c);
            mean_gap += (mo - ms) * (mo - ms);
            std_gap += (so - ss) * (so - ss);
        }
        expected += mean_gap / c_count + std_gap / c_count;
    }
    CHECK(style_loss(out, sty, ex) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("weighted_mse_loss: values") {
    SUBCASE("all-zero map annihilates any residual") {
        Tensor<float> out = rand_tensor_f({1, 3, 6, 6}, 11);
        Tensor<float> content = rand_tensor_f({1, 3, 6, 6}, 12);
        auto m = map_from(Tensor<float>::zeros({1, 1, 6, 6}));
        CHECK(weighted_mse_loss(out, content, m) == 0.0);
    }
    SUBCASE("all-ones map reduces to plain MSE") {
        Tensor<float> out = rand_tensor_f({2, 3, 5, 5}, 13);
        Tensor<float> content = rand_tensor_f({2, 3, 5, 5}, 14);
        auto m = map_from(Tensor<float>::constant({2, 1, 5, 5}, 1.0f));
        const double mse = ((out.data - content.data).square().sum()) / out.size();
        CHECK(weighted_mse_loss(out, content, m) == doctest::Approx(mse).epsilon(1e-7));
    }
    SUBCASE("hand-computed 2x2 example") {
        Tensor<float> content = Tensor<float>::zeros({1, 3, 2, 2});
        Tensor<float> out = Tensor<float>::constant({1, 3, 2, 2}, 2.0f);
        Tensor<float> w({1, 1, 2, 2});
        w.data[0] = 1.0f;
        w.data[1] = 0.0f;
        w.data[2] = 0.0f;
        w.data[3] = 0.5f;
        // per channel: mean{4, 0, 0, 2} = 1.5
        CHECK(weighted_mse_loss(out, content, map_from(w)) == doctest::Approx(1.5).epsilon(1e-7));
    }
    SUBCASE("shape guards") {
        Tensor<float> out = rand_tensor_f({1, 3, 4, 4}, 15);
        Tensor<float> content = rand_tensor_f({1, 3, 5, 5}, 16);
        auto m = map_from(Tensor<float>::zeros({1, 1, 4, 4}));
        CHECK_THROWS_AS(weighted_mse_loss(out, content, m), InvalidArgument);
        Tensor<float> content2 = rand_tensor_f({1, 3, 4, 4}, 17);
        auto bad = map_from(Tensor<float>::zeros({1, 1, 5, 5}));
        CHECK_THROWS_AS(weighted_mse_loss(out, content2, bad), InvalidArgument);
    }
}

TEST_CASE("weighted_mse_loss: analytic gradient matches finite differences (double)") {
    Tensor<double> content = rand_tensor({1, 3, 8, 8}, 18, 0.0, 1.0);
    Tensor<double> w01 = rand_tensor({1, 1, 8, 8}, 19, 0.0, 1.0);
    EdgeWeightMap m;
    m.weights = w01.cast<float>();
    m.source_h = 8;
    m.source_w = 8;
    Variable<double> out(rand_tensor({1, 3, 8, 8}, 20, 0.0, 1.0), true);
    Variable<double> c = constant(content);
    const double worst =
        grad_check([&] { return weighted_mse_loss(out, c, m); }, out, 1e-5, 20);
    CHECK(worst < 1e-4);
}

TEST_CASE("weighted_mse_loss: gradient is exactly zero on zero-weight pixels") {
    Tensor<float> w = Tensor<float>::zeros({1, 1, 4, 4});
    // S = left half zero; right half weighted
    for (Eigen::Index y = 0; y < 4; ++y)
        for (Eigen::Index x = 2; x < 4; ++x) w.at(0, 0, y, x) = 0.5f + 0.1f * x;
    Variable<float> out(rand_tensor_f({1, 3, 4, 4}, 21), true);
    Variable<float> content = constant(rand_tensor_f({1, 3, 4, 4}, 22));
    weighted_mse_loss(out, content, map_from(w)).backward();

    const Tensor<float>& g = out.grad();
    bool off_mask_nonzero = false;
    for (Eigen::Index c = 0; c < 3; ++c)
        for (Eigen::Index y = 0; y < 4; ++y)
            for (Eigen::Index x = 0; x < 4; ++x) {
                if (x < 2)
                    CHECK(g.at(0, c, y, x) == 0.0f);  // exactly zero on S
                else if (g.at(0, c, y, x) != 0.0f)
                    off_mask_nonzero = true;
            }
    CHECK(off_mask_nonzero);
}

TEST_CASE("weighted_mse_loss is 1-homogeneous in the map") {
    Tensor<float> out = rand_tensor_f({1, 3, 6, 6}, 23);
    Tensor<float> content = rand_tensor_f({1, 3, 6, 6}, 24);
    Tensor<float> w = rand_tensor_f({1, 1, 6, 6}, 25);
    const double base = weighted_mse_loss(out, content, map_from(w));
    Tensor<float> w3 = w;
    w3.data *= 3.0f;
    CHECK(weighted_mse_loss(out, content, map_from(w3)) ==
          doctest::Approx(3.0 * base).epsilon(1e-6));
}

TEST_CASE("adversarial losses: labeled endpoints and hand arithmetic") {
    Tensor<float> ones = Tensor<float>::constant({1, 1, 4, 4}, 1.0f);
    Tensor<float> zeros = Tensor<float>::zeros({1, 1, 4, 4});
    Tensor<float> threes = Tensor<float>::constant({1, 1, 4, 4}, 3.0f);

    CHECK(adversarial_loss_d(ones, zeros) == doctest::Approx(0.0));
    CHECK(adversarial_loss_d(zeros, ones) == doctest::Approx(1.0));
    CHECK(adversarial_loss_g(ones) == doctest::Approx(0.0));
    CHECK(adversarial_loss_g(zeros) == doctest::Approx(0.5));
    CHECK(adversarial_loss_g(threes) == doctest::Approx(2.0));

    Tensor<float> r = rand_tensor_f({2, 1, 3, 3}, 26, -1.0f, 2.0f);
    Tensor<float> f = rand_tensor_f({2, 1, 3, 3}, 27, -1.0f, 2.0f);
    const double expected =
        0.5 * ((r.data - 1.0f).square().sum() / r.size() + f.data.square().sum() / f.size());
    CHECK(adversarial_loss_d(r, f) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("total_loss: projections and linear combination") {
    auto ex = test_extractor();
    Tensor<float> content = rand_tensor_f({1, 3, 32, 32}, 28);
    Tensor<float> out = rand_tensor_f({1, 3, 32, 32}, 29);
    Tensor<float> style = rand_tensor_f({1, 3, 32, 32}, 30);
    Tensor<float> scores = rand_tensor_f({1, 1, 2, 2}, 31, -1.0f, 1.0f);
    EdgeWeightMap m = edge_weight_map(content, 1.0f);

    SUBCASE("all-zero weights still report components") {
        LossWeights zero{0, 0, 0, 0};
        LossBundle b = total_loss(out, content, style, m, scores, zero, ex);
        CHECK(b.total == 0.0);
        CHECK(b.content > 0.0);
        CHECK(b.style > 0.0);
        CHECK(b.weighted_mse > 0.0);
    }
    SUBCASE("unit weighted_mse projection") {
        LossWeights proj{0, 0, 0, 1};
        LossBundle b = total_loss(out, content, style, m, scores, proj, ex);
        CHECK(b.total == doctest::Approx(b.weighted_mse).epsilon(1e-12));
    }
    SUBCASE("dot product with default-style weights") {
        LossWeights w{1, 10, 1, 50};
        LossBundle b = total_loss(out, content, style, m, scores, w, ex);
        const double dot = 1 * b.content + 10 * b.style + 1 * b.adversarial + 50 * b.weighted_mse;
        CHECK(b.total == doctest::Approx(dot).epsilon(1e-6));
        CHECK(b.content >= 0.0);
        CHECK(b.style >= 0.0);
        CHECK(b.weighted_mse >= 0.0);
    }
    SUBCASE("negative weights are rejected") {
        LossWeights bad{1, -1, 1, 1};
        CHECK_THROWS_AS(total_loss(out, content, style, m, scores, bad, ex), InvalidArgument);
    }
}

TEST_CASE("extractor save/load round-trips and from_weights validates") {
    rst::testing::TempDir tmp("rst_ext");
    auto ex = test_extractor(99);
    Tensor<float> img = rand_tensor_f({1, 3, 16, 16}, 32);
    auto before = ex.features(img);

    std::vector<std::pair<std::string, Tensor<float>>> entries;
    for (const auto& e : ex.weight_entries()) entries.emplace_back(e.name, e.var.value());
    auto loaded = PerceptualExtractor<float>::from_weights(entries);
    auto after = loaded.features(img);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK((before[i].data - after[i].data).abs().maxCoeff() == 0.0f);

    entries[0].second = Tensor<float>::zeros({2, 2, 2, 2});
    CHECK_THROWS_AS(PerceptualExtractor<float>::from_weights(entries), CorruptCheckpoint);
}
