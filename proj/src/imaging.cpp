// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "rst/imaging.hpp"

namespace rst {

namespace {

constexpr float kEdgeMapEps = 1e-8f;

inline Eigen::Index clamp_index(Eigen::Index i, Eigen::Index n) {
    return std::min(std::max(i, Eigen::Index(0)), n - 1);
}

// reflect-101 fold: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (n == 1) return 0;
    const Eigen::Index period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

}  // namespace

ImageTensor to_grayscale(const ImageTensor& img) {
    if (img.shape.c != 3)
        throw InvalidArgument("to_grayscale: expected 3 channels, got " + img.shape.str());
    ImageTensor out(Shape{img.shape.b, 1, img.shape.h, img.shape.w});
    out.range = img.range;
    const Eigen::Index hw = img.shape.h * img.shape.w;
    for (Eigen::Index b = 0; b < img.shape.b; ++b) {
        const float* r = img.plane(b, 0);
        const float* g = img.plane(b, 1);
        const float* bl = img.plane(b, 2);
        float* dst = out.plane(b, 0);
        for (Eigen::Index i = 0; i < hw; ++i)
            dst[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * bl[i];
    }
    return out;
}

ImageTensor laplacian(const ImageTensor& img) {
    if (img.shape.c != 1)
        throw InvalidArgument("laplacian: expected 1 channel, got " + img.shape.str());
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    ImageTensor out(img.shape);
    for (Eigen::Index b = 0; b < img.shape.b; ++b) {
        const float* p = img.plane(b, 0);
        float* d = out.plane(b, 0);
        for (Eigen::Index y = 0; y < h; ++y) {
            const Eigen::Index yu = clamp_index(y - 1, h), yd = clamp_index(y + 1, h);
            for (Eigen::Index x = 0; x < w; ++x) {
                const Eigen::Index xl = clamp_index(x - 1, w), xr = clamp_index(x + 1, w);
                d[y * w + x] = p[yu * w + x] + p[yd * w + x] + p[y * w + xl] + p[y * w + xr] -
                               4.0f * p[y * w + x];
            }
        }
    }
    return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, float sigma) {
    if (sigma < 0) throw InvalidArgument("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0f) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0.0f;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5f * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (float& k : kernel) k /= sum;

    const Eigen::Index h = img.shape.h, w = img.shape.w;
    ImageTensor tmp(img.shape), out(img.shape);
    out.range = img.range;
    for (Eigen::Index b = 0; b < img.shape.b; ++b)
        for (Eigen::Index c = 0; c < img.shape.c; ++c) {
            const float* src = img.plane(b, c);
            float* mid = tmp.plane(b, c);
            for (Eigen::Index y = 0; y < h; ++y)
                for (Eigen::Index x = 0; x < w; ++x) {
                    float acc = 0.0f;
                    for (int k = -radius; k <= radius; ++k)
                        acc += kernel[k + radius] * src[y * w + clamp_index(x + k, w)];
                    mid[y * w + x] = acc;
                }
            float* dst = out.plane(b, c);
            for (Eigen::Index y = 0; y < h; ++y)
                for (Eigen::Index x = 0; x < w; ++x) {
                    float acc = 0.0f;
                    for (int k = -radius; k <= radius; ++k)
                        acc += kernel[k + radius] * mid[clamp_index(y + k, h) * w + x];
                    dst[y * w + x] = acc;
                }
        }
    return out;
}

EdgeWeightMap edge_weight_map(const ImageTensor& content, float blur_sigma) {
    if (content.shape.c != 3 && content.shape.c != 1)
        throw InvalidArgument("edge_weight_map: expected 1 or 3 channels, got " +
                              content.shape.str());
    ImageTensor gray = content.shape.c == 3 ? to_grayscale(content) : content;
    ImageTensor lap = laplacian(gray);
    lap.data = lap.data.abs();
    if (blur_sigma > 0.0f) lap = gaussian_blur(lap, blur_sigma);

    const Eigen::Index hw = lap.shape.h * lap.shape.w;
    for (Eigen::Index b = 0; b < lap.shape.b; ++b) {
        Eigen::Map<Eigen::ArrayXf> plane(lap.plane(b, 0), hw);
        const float mx = plane.maxCoeff();
        if (mx < kEdgeMapEps)
            plane.setZero();
        else
            plane /= mx;
    }
    EdgeWeightMap map;
    map.weights = std::move(lap);
    map.source_h = content.shape.h;
    map.source_w = content.shape.w;
    return map;
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw InvalidArgument("resize_bilinear: target dimensions must be positive");
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    ImageTensor out(Shape{img.shape.b, img.shape.c, out_h, out_w});
    out.range = img.range;
    const float sy = static_cast<float>(h) / out_h;
    const float sx = static_cast<float>(w) / out_w;
    for (Eigen::Index b = 0; b < img.shape.b; ++b)
        for (Eigen::Index c = 0; c < img.shape.c; ++c) {
            const float* src = img.plane(b, c);
            float* dst = out.plane(b, c);
            for (int y = 0; y < out_h; ++y) {
                const float fy = (y + 0.5f) * sy - 0.5f;
                const Eigen::Index y0 = clamp_index(static_cast<Eigen::Index>(std::floor(fy)), h);
                const Eigen::Index y1 = clamp_index(y0 + 1, h);
                const float wy = std::min(1.0f, std::max(0.0f, fy - static_cast<float>(y0)));
                for (int x = 0; x < out_w; ++x) {
                    const float fx = (x + 0.5f) * sx - 0.5f;
                    const Eigen::Index x0 =
                        clamp_index(static_cast<Eigen::Index>(std::floor(fx)), w);
                    const Eigen::Index x1 = clamp_index(x0 + 1, w);
                    const float wx = std::min(1.0f, std::max(0.0f, fx - static_cast<float>(x0)));
                    const float top = src[y0 * w + x0] * (1 - wx) + src[y0 * w + x1] * wx;
                    const float bot = src[y1 * w + x0] * (1 - wx) + src[y1 * w + x1] * wx;
                    dst[y * out_w + x] = top * (1 - wy) + bot * wy;
                }
            }
        }
    return out;
}

ImageTensor pad_to_multiple_reflect(const ImageTensor& img, int multiple) {
    if (multiple < 1) throw InvalidArgument("pad_to_multiple_reflect: multiple must be >= 1");
    const Eigen::Index h = img.shape.h, w = img.shape.w;
    const Eigen::Index ph = (multiple - h % multiple) % multiple;
    const Eigen::Index pw = (multiple - w % multiple) % multiple;
    if (ph == 0 && pw == 0) return img;
    ImageTensor out(Shape{img.shape.b, img.shape.c, h + ph, w + pw});
    out.range = img.range;
    for (Eigen::Index b = 0; b < img.shape.b; ++b)
        for (Eigen::Index c = 0; c < img.shape.c; ++c) {
            const float* src = img.plane(b, c);
            float* dst = out.plane(b, c);
            for (Eigen::Index y = 0; y < h + ph; ++y) {
                const Eigen::Index sy = reflect_index(y, h);
                for (Eigen::Index x = 0; x < w + pw; ++x)
                    dst[y * (w + pw) + x] = src[sy * w + reflect_index(x, w)];
            }
        }
    return out;
}

ImageTensor crop_top_left(const ImageTensor& img, int h, int w) {
    if (h > img.shape.h || w > img.shape.w)
        throw InvalidArgument("crop_top_left: crop larger than image");
    ImageTensor out(Shape{img.shape.b, img.shape.c, h, w});
    out.range = img.range;
    for (Eigen::Index b = 0; b < img.shape.b; ++b)
        for (Eigen::Index c = 0; c < img.shape.c; ++c) {
            const float* src = img.plane(b, c);
            float* dst = out.plane(b, c);
            for (int y = 0; y < h; ++y) std::copy_n(src + y * img.shape.w, w, dst + y * w);
        }
    return out;
}

ImageTensor to_unit_range(const ImageTensor& img) {
    if (img.range == ValueRange::Unit) return img;
    ImageTensor out = img;
    out.data = (out.data + 1.0f) * 0.5f;
    out.range = ValueRange::Unit;
    return out;
}

}  // namespace rst
