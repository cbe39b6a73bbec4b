// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <iostream>

#include "rst/training.hpp"

namespace rst {

namespace {

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Dataset::Dataset(const std::filesystem::path& dir, int crop_size, std::uint64_t seed)
    : crop_(crop_size), seed_(seed) {
    if (crop_size < 1) throw InvalidArgument("dataset: crop_size must be >= 1");
    if (!std::filesystem::is_directory(dir))
        throw NotFound("content directory does not exist: " + dir.string());

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && has_image_extension(entry.path()))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    for (const auto& f : files) {
        try {
            ImageTensor img = load_image(f);
            // resize shorter side to the crop size, preserving aspect ratio
            const double scale =
                static_cast<double>(crop_size) / std::min(img.shape.h, img.shape.w);
            const int nh = std::max(crop_size, static_cast<int>(std::lround(img.shape.h * scale)));
            const int nw = std::max(crop_size, static_cast<int>(std::lround(img.shape.w * scale)));
            images_.push_back(resize_bilinear(img, nh, nw));
        } catch (const Error& e) {
            std::cerr << "warning: skipping unreadable image " << f.string() << " (" << e.what()
                      << ")\n";
        }
    }
    if (images_.empty())
        throw NotFound("no decodable images in content directory: " + dir.string());
}

std::vector<int> Dataset::epoch_order(std::int64_t epoch) const {
    std::vector<int> order(images_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed_, 0x6f72646572, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng.engine());
    return order;
}

ImageTensor Dataset::item(std::int64_t epoch, std::int64_t position) const {
    const auto order = epoch_order(epoch);
    const int idx = order[static_cast<std::size_t>(position) % order.size()];
    const ImageTensor& img = images_[static_cast<std::size_t>(idx)];
    Rng rng(derive_seed(seed_, 0x63726f70 ^ static_cast<std::uint64_t>(epoch),
                        static_cast<std::uint64_t>(position)));
    const Eigen::Index max_y = img.shape.h - crop_;
    const Eigen::Index max_x = img.shape.w - crop_;
    const Eigen::Index oy = max_y > 0 ? rng.uniform_int(max_y + 1) : 0;
    const Eigen::Index ox = max_x > 0 ? rng.uniform_int(max_x + 1) : 0;

    ImageTensor out(Shape{1, 3, crop_, crop_});
    out.range = ValueRange::Unit;
    for (int c = 0; c < 3; ++c) {
        const float* src = img.plane(0, c);
        float* dst = out.plane(0, c);
        for (int y = 0; y < crop_; ++y)
            std::copy_n(src + (oy + y) * img.shape.w + ox, crop_, dst + y * crop_);
    }
    return out;
}

}  // namespace rst
