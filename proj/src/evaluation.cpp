// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "rst/evaluation.hpp"

namespace rst {

namespace {

constexpr double kRatioEps = 1e-8;
constexpr double kMonotoneSlackFraction = 0.05;

Tensor<float> abs_laplacian_luma(const ImageTensor& img) {
    ImageTensor gray = img.shape.c == 3 ? to_grayscale(img) : img;
    ImageTensor lap = laplacian(gray);
    lap.data = lap.data.abs();
    return lap;
}

}  // namespace

double edge_preservation_score(const ImageTensor& content, const ImageTensor& stylized) {
    if (!(content.shape == stylized.shape))
        throw InvalidArgument("edge_preservation_score: shape mismatch " + content.shape.str() +
                              " vs " + stylized.shape.str());
    const Tensor<float> a = abs_laplacian_luma(content);
    const Tensor<float> b = abs_laplacian_luma(stylized);
    const Eigen::Index n = a.size();

    double mean_a = 0, mean_b = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        mean_a += a.data[i];
        mean_b += b.data[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0, var_a = 0, var_b = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double da = a.data[i] - mean_a;
        const double db = b.data[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) return 0.0;
    return cov / std::sqrt(var_a * var_b);
}

RegionPartition RegionPartition::from_content(const ImageTensor& content, float threshold,
                                              float blur_sigma) {
    if (!(threshold > 0.0f && threshold <= 1.0f))
        throw InvalidArgument("region partition: threshold must be in (0,1]");
    const EdgeWeightMap map = edge_weight_map(content, blur_sigma);
    RegionPartition part;
    part.threshold = threshold;
    part.detail_mask = Tensor<std::uint8_t>(map.weights.shape);
    part.blank_mask = Tensor<std::uint8_t>(map.weights.shape);
    for (Eigen::Index i = 0; i < map.weights.size(); ++i) {
        const bool detail = map.weights.data[i] > threshold;
        part.detail_mask.data[i] = detail ? 1 : 0;
        part.blank_mask.data[i] = detail ? 0 : 1;
    }
    return part;
}

RegionContrast region_texture_contrast(const ImageTensor& content, const ImageTensor& stylized,
                                       float threshold, float blur_sigma) {
    if (!(content.shape == stylized.shape))
        throw InvalidArgument("region_texture_contrast: shape mismatch " + content.shape.str() +
                              " vs " + stylized.shape.str());
    const RegionPartition part = RegionPartition::from_content(content, threshold, blur_sigma);

    ImageTensor residual = stylized;
    residual.data -= content.data;
    const Tensor<float> energy = abs_laplacian_luma(residual);

    double blank_sum = 0, detail_sum = 0;
    std::int64_t blank_n = 0, detail_n = 0;
    for (Eigen::Index i = 0; i < energy.size(); ++i) {
        if (part.detail_mask.data[i]) {
            detail_sum += energy.data[i];
            ++detail_n;
        } else {
            blank_sum += energy.data[i];
            ++blank_n;
        }
    }
    if (blank_n == 0 || detail_n == 0)
        throw DegeneratePartition("region partition is degenerate at threshold " +
                                  std::to_string(threshold));
    RegionContrast out;
    out.blank_energy = blank_sum / blank_n;
    out.detail_energy = detail_sum / detail_n;
    out.ratio = out.blank_energy / (out.detail_energy + kRatioEps);
    return out;
}

SweepMonotonicity sweep_monotonicity(const ImageTensor& content,
                                     const std::vector<ImageTensor>& sweep_outputs,
                                     const ImageTensor& style,
                                     const PerceptualExtractor<float>& extractor) {
    if (sweep_outputs.size() < 2)
        throw InvalidArgument("sweep_monotonicity: need at least 2 sweep outputs");
    SweepMonotonicity out;
    const StyleStats<float> stats = style_statistics(style, extractor);
    for (const auto& o : sweep_outputs) {
        out.content_dist.push_back(content_loss(o, content, extractor));
        out.style_dist.push_back(static_cast<double>(
            style_loss(constant(o), stats, extractor).value().data[0]));
    }

    auto range_of = [](const std::vector<double>& v) {
        double lo = v[0], hi = v[0];
        for (double x : v) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        return hi - lo;
    };
    const double content_slack = kMonotoneSlackFraction * range_of(out.content_dist);
    const double style_slack = kMonotoneSlackFraction * range_of(out.style_dist);

    out.content_monotone = true;
    out.style_monotone = true;
    for (std::size_t k = 0; k + 1 < sweep_outputs.size(); ++k) {
        if (out.content_dist[k + 1] < out.content_dist[k] - content_slack)
            out.content_monotone = false;
        if (out.style_dist[k + 1] > out.style_dist[k] + style_slack) out.style_monotone = false;
    }
    return out;
}

}  // namespace rst
