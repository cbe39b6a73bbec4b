// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rst/imaging.hpp"
#include "rst/losses.hpp"
#include "rst/network.hpp"

namespace rst {

enum class DiscriminatorMode { Joint, FrozenPretrained };

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
};

/// Full hyperparameter record; serializes losslessly to/from a JSON file
/// with exactly these fields (unknown keys are rejected).
struct TrainingConfig {
    std::filesystem::path content_dir;
    std::filesystem::path style_image;
    int crop_size = 256;
    int batch_size = 8;
    int epochs = 8;
    AdamConfig optimizer;
    LossWeights loss_weights;
    float blur_sigma = 1.0f;
    std::uint64_t seed = 0;
    GeneratorSpec generator_spec;
    DiscriminatorMode discriminator_mode = DiscriminatorMode::Joint;
    bool iterative_mse = false;
    std::filesystem::path extractor_weights;  // empty -> seeded random extractor

    void validate() const;
};

TrainingConfig load_training_config(const std::filesystem::path& path);
void save_training_config(const TrainingConfig& cfg, const std::filesystem::path& path);

/// Canonical JSON (sorted keys) used for hashing and the checkpoint sidecar.
std::string training_config_json(const TrainingConfig& cfg);
std::string config_hash(const TrainingConfig& cfg);

/// Content corpus: decodes every usable image up front (corrupt files are
/// skipped with a warning), resizes the shorter side to crop_size, and yields
/// seeded random crops in a seeded per-epoch order.
class Dataset {
public:
    Dataset(const std::filesystem::path& dir, int crop_size, std::uint64_t seed);

    std::size_t size() const { return images_.size(); }
    int crop_size() const { return crop_; }

    std::vector<int> epoch_order(std::int64_t epoch) const;

    /// The `position`-th crop of epoch `epoch` (applies the epoch order).
    ImageTensor item(std::int64_t epoch, std::int64_t position) const;

private:
    std::vector<ImageTensor> images_;
    int crop_ = 0;
    std::uint64_t seed_ = 0;
};

/// Raised when a training step produces a non-finite loss.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& msg, LossBundle bundle)
        : Error(msg), bundle(std::move(bundle)) {}
    LossBundle bundle;
};

/// Everything that evolves during training. Checkpoints capture the learnable
/// parts plus enough metadata to rebuild the rest deterministically.
/// Move-only: generator parameters are shared nodes, copies would alias them.
struct TrainState {
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    std::uint64_t seed = 0;
    std::string cfg_hash;
    std::filesystem::path extractor_source;  // empty -> seeded random extractor
    Generator<float> generator;
    Discriminator<float> discriminator;
    PerceptualExtractor<float> extractor;
    Adam<float> gen_opt;
    Adam<float> disc_opt;

    // cached style statistics, keyed by a fingerprint of the style tensor
    std::uint64_t style_key = 0;
    StyleStats<float> style_stats;

    // diagnostics: the edge-weight map used by the most recent step
    ImageTensor last_weight_map;

    TrainState() = default;
    TrainState(const TrainState&) = delete;
    TrainState& operator=(const TrainState&) = delete;
    TrainState(TrainState&&) = default;
    TrainState& operator=(TrainState&&) = default;
};

TrainState init_train_state(const TrainingConfig& cfg);

/// One discriminator update (joint mode) followed by one generator update.
/// Returns the generator's pre-update LossBundle; increments state.step.
LossBundle train_step(TrainState& state, const ImageTensor& batch, const ImageTensor& style,
                      const TrainingConfig& cfg);

/// Full training run into run_dir (per-epoch checkpoints, final checkpoint,
/// per-step CSV loss log). Resumes from the newest checkpoint in run_dir if
/// one exists. Returns the final checkpoint path.
std::filesystem::path train(const TrainingConfig& cfg, const std::filesystem::path& run_dir);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

/// Load and verify against the configured generator spec; rebuilds optimizer
/// state and the extractor.
TrainState load_checkpoint(const std::filesystem::path& path, const TrainingConfig& cfg);

/// Inference-only load: accepts the archived spec as-is.
struct LoadedGenerator {
    GeneratorSpec spec;
    Generator<float> generator;
    std::int64_t step = 0;
};
LoadedGenerator load_generator(const std::filesystem::path& path);

// exposed for extractor tooling/tests
PerceptualExtractor<float> load_extractor(const std::filesystem::path& path);
void save_extractor(const PerceptualExtractor<float>& extractor,
                    const std::filesystem::path& path);

/// Stylize an image of arbitrary size: reflect-pad up to the generator's
/// required multiple, run, crop back.
inline ImageTensor stylize_padded(const Generator<float>& gen, const ImageTensor& img,
                                  FusionCoefficients coeffs = {}) {
    const int mult = gen.spec().required_multiple();
    const ImageTensor padded = pad_to_multiple_reflect(img, mult);
    const ImageTensor out = gen.stylize(padded, coeffs);
    return crop_top_left(out, static_cast<int>(img.shape.h), static_cast<int>(img.shape.w));
}

}  // namespace rst
