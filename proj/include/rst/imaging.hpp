// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <utility>

#include "rst/tensor.hpp"

namespace rst {

/// Decode a PNG or JPEG file into a (1,3,H,W) unit-range tensor.
/// If target_size (H,W) is given, the image is bilinearly resized to it.
ImageTensor load_image(const std::filesystem::path& path,
                       std::optional<std::pair<int, int>> target_size = std::nullopt);

/// Write a (1,3,H,W) tensor as an 8-bit RGB PNG. Values are clamped to the
/// tensor's declared range and quantized.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

/// Write a (B,1,H,W) map (first batch item) as an 8-bit grayscale PNG,
/// clamping to [0,1].
void save_gray_image(const Tensor<float>& map, const std::filesystem::path& path);

/// Rec.601 luminance: (B,3,H,W) -> (B,1,H,W).
ImageTensor to_grayscale(const ImageTensor& img);

/// Discrete 4-neighbor Laplacian, 3x3 stencil [[0,1,0],[1,-4,1],[0,1,0]],
/// replicate (edge-clamp) padding. Requires C = 1.
ImageTensor laplacian(const ImageTensor& img);

/// Separable Gaussian blur with replicate padding; sigma 0 returns the input.
ImageTensor gaussian_blur(const ImageTensor& img, float sigma);

/// Edge-weight map for the weighted MSE loss:
/// grayscale -> laplacian -> |.| -> optional blur -> divide by per-image max.
/// A spatially constant image yields an all-zero map.
EdgeWeightMap edge_weight_map(const ImageTensor& content, float blur_sigma);

/// Bilinear resize (half-pixel centers) to (out_h, out_w).
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);

/// Reflect-pad on the bottom/right so H and W become multiples of `multiple`.
ImageTensor pad_to_multiple_reflect(const ImageTensor& img, int multiple);

/// Top-left crop back to (h, w).
ImageTensor crop_top_left(const ImageTensor& img, int h, int w);

/// Map a signed-range tensor into unit range (or pass a unit one through).
ImageTensor to_unit_range(const ImageTensor& img);

}  // namespace rst
