// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Quantified forms of the qualitative transfer properties: edge preservation,
// blank-vs-detail texture contrast, and interpolation-sweep monotonicity.

#pragma once

#include <cstdint>
#include <vector>

#include "rst/imaging.hpp"
#include "rst/losses.hpp"

namespace rst {

/// Pearson correlation between the Laplacian magnitudes of the two images'
/// luminance; 1.0 for identical structure, 0 if either map is constant.
double edge_preservation_score(const ImageTensor& content, const ImageTensor& stylized);

/// Disjoint, exhaustive detail/blank pixel masks thresholded on the
/// normalized edge-weight map of the content image.
struct RegionPartition {
    Tensor<std::uint8_t> detail_mask;  // (B,1,H,W), 1 where edge weight > threshold
    Tensor<std::uint8_t> blank_mask;
    float threshold = 0.2f;

    static RegionPartition from_content(const ImageTensor& content, float threshold,
                                        float blur_sigma);
};

struct RegionContrast {
    double blank_energy = 0.0;
    double detail_energy = 0.0;
    double ratio = 0.0;  // blank / (detail + eps)
};

/// High-frequency energy of the stylization residual, split by region.
/// Throws DegeneratePartition if either mask is empty.
RegionContrast region_texture_contrast(const ImageTensor& content, const ImageTensor& stylized,
                                       float threshold, float blur_sigma = 1.0f);

struct SweepMonotonicity {
    std::vector<double> content_dist;
    std::vector<double> style_dist;
    bool content_monotone = false;  // non-decreasing within slack
    bool style_monotone = false;    // non-increasing within slack
};

/// Perceptual content/style distances along a beta-ordered sweep; monotone
/// flags tolerate per-step violations up to 5% of the sequence range.
SweepMonotonicity sweep_monotonicity(const ImageTensor& content,
                                     const std::vector<ImageTensor>& sweep_outputs,
                                     const ImageTensor& style,
                                     const PerceptualExtractor<float>& extractor);

}  // namespace rst
