// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic generator for the bundled test corpus: small content images
// mixing smooth backgrounds with hard-edged shapes (so edge/blank region
// statistics are meaningful), three held-out images, and one high-texture
// style image. Run once; the PNGs are committed.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rst/evaluation.hpp"
#include "rst/imaging.hpp"

using namespace rst;

namespace {

using Color = std::array<float, 3>;

void fill_linear_gradient(ImageTensor& img, Color c0, Color c1, float angle) {
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    const float dx = std::cos(angle), dy = std::sin(angle);
    for (int c = 0; c < 3; ++c) {
        float* p = img.plane(0, c);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x) {
                const float t = 0.5f + 0.5f * ((x * dx + y * dy) / std::max(h, w) * 1.4f - 0.2f);
                const float tt = std::min(1.0f, std::max(0.0f, t));
                p[y * w + x] = c0[c] * (1 - tt) + c1[c] * tt;
            }
    }
}

void draw_rect(ImageTensor& img, int x0, int y0, int x1, int y1, Color color) {
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    for (int c = 0; c < 3; ++c) {
        float* p = img.plane(0, c);
        for (int y = std::max(0, y0); y < std::min<int>(h, y1); ++y)
            for (int x = std::max(0, x0); x < std::min<int>(w, x1); ++x)
                p[y * w + x] = color[c];
    }
}

void draw_circle(ImageTensor& img, float cx, float cy, float r, Color color) {
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    for (int c = 0; c < 3; ++c) {
        float* p = img.plane(0, c);
        for (Eigen::Index y = 0; y < h; ++y)
            for (Eigen::Index x = 0; x < w; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) p[y * w + x] = color[c];
    }
}

void draw_stripes(ImageTensor& img, int x0, int y0, int x1, int y1, int period, Color a, Color b,
                  bool vertical) {
    const Eigen::Index w = img.shape.w;
    for (int c = 0; c < 3; ++c) {
        float* p = img.plane(0, c);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                const int k = vertical ? x : y;
                p[y * w + x] = ((k / period) % 2 == 0 ? a : b)[c];
            }
    }
}

Color rand_color(Rng& rng, float lo = 0.1f, float hi = 0.9f) {
    return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
            static_cast<float>(rng.uniform(lo, hi))};
}

ImageTensor make_content(int h, int w, std::uint64_t seed) {
    ImageTensor img(Shape{1, 3, h, w});
    img.range = ValueRange::Unit;
    Rng rng(seed);
    fill_linear_gradient(img, rand_color(rng, 0.15f, 0.5f), rand_color(rng, 0.5f, 0.9f),
                         static_cast<float>(rng.uniform(0, 3.14)));

    const int n_shapes = 10 + static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < n_shapes; ++i) {
        const Color col = rand_color(rng);
        switch (rng.uniform_int(3)) {
            case 0: {
                const int x0 = static_cast<int>(rng.uniform_int(w - 12));
                const int y0 = static_cast<int>(rng.uniform_int(h - 12));
                draw_rect(img, x0, y0, x0 + 8 + static_cast<int>(rng.uniform_int(w / 3)),
                          y0 + 8 + static_cast<int>(rng.uniform_int(h / 3)), col);
                break;
            }
            case 1:
                draw_circle(img, static_cast<float>(rng.uniform(10, w - 10)),
                            static_cast<float>(rng.uniform(10, h - 10)),
                            static_cast<float>(rng.uniform(5, std::min(h, w) / 4.0)), col);
                break;
            default: {
                const int x0 = static_cast<int>(rng.uniform_int(w / 2));
                const int y0 = static_cast<int>(rng.uniform_int(h / 2));
                draw_stripes(img, x0, y0, x0 + w / 3, y0 + h / 3,
                             2 + static_cast<int>(rng.uniform_int(4)), col, rand_color(rng),
                             rng.uniform() < 0.5);
                break;
            }
        }
    }
    return img;
}

ImageTensor make_style(int h, int w, std::uint64_t seed) {
    ImageTensor img(Shape{1, 3, h, w});
    img.range = ValueRange::Unit;
    Rng rng(seed);
    // saturated wave interference pattern, palette far from the content images
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            const float u = static_cast<float>(x) / w, v = static_cast<float>(y) / h;
            const float swirl = std::sin(14.0f * u + 4.0f * std::sin(6.0f * v)) *
                                std::cos(11.0f * v - 3.0f * std::sin(5.0f * u));
            img.at(0, 0, y, x) = 0.5f + 0.45f * std::sin(20.0f * u + 7.0f * swirl);
            img.at(0, 1, y, x) = 0.5f + 0.45f * std::sin(16.0f * v + 9.0f * swirl + 2.1f);
            img.at(0, 2, y, x) = 0.5f + 0.45f * std::cos(12.0f * (u + v) + 5.0f * swirl + 4.2f);
        }
    // sprinkle hard-edged paint dabs
    for (int i = 0; i < 60; ++i)
        draw_circle(img, static_cast<float>(rng.uniform(0, w)), static_cast<float>(rng.uniform(0, h)),
                    static_cast<float>(rng.uniform(2, 7)), rand_color(rng, 0.0f, 1.0f));
    return img;
}

double detail_fraction(const ImageTensor& img, float threshold, float sigma) {
    const EdgeWeightMap map = edge_weight_map(img, sigma);
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < map.weights.size(); ++i)
        if (map.weights.data[i] > threshold) ++n;
    return static_cast<double>(n) / map.weights.size();
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path root = argc > 1 ? argv[1] : "assets/fixtures";
    std::filesystem::create_directories(root / "content");
    std::filesystem::create_directories(root / "holdout");

    const int sizes[8][2] = {{96, 128}, {128, 96}, {112, 144}, {144, 112},
                             {96, 144}, {144, 96}, {128, 128}, {112, 96}};
    for (int i = 0; i < 8; ++i) {
        ImageTensor img = make_content(sizes[i][0], sizes[i][1], 1000 + i);
        char name[32];
        std::snprintf(name, sizeof(name), "c%d.png", i);
        save_image(img, root / "content" / name);
        std::printf("content/%s  %dx%d  detail %.1f%%\n", name, sizes[i][1], sizes[i][0],
                    100.0 * detail_fraction(img, 0.2f, 1.0f));
    }
    for (int i = 0; i < 3; ++i) {
        ImageTensor img = make_content(96, 96, 2000 + i);
        char name[32];
        std::snprintf(name, sizeof(name), "h%d.png", i);
        save_image(img, root / "holdout" / name);
        std::printf("holdout/%s  96x96  detail %.1f%%\n", name,
                    100.0 * detail_fraction(img, 0.2f, 1.0f));
    }
    ImageTensor style = make_style(192, 192, 3000);
    save_image(style, root / "style.png");
    std::printf("style.png  192x192\n");
    return 0;
}
