// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rst/training.hpp"

namespace rst {

namespace {

std::uint64_t tensor_fingerprint(const ImageTensor& t) {
    std::uint64_t h = fnv1a(&t.shape.b, sizeof(t.shape.b));
    h = fnv1a(&t.shape.c, sizeof(t.shape.c), h);
    h = fnv1a(&t.shape.h, sizeof(t.shape.h), h);
    h = fnv1a(&t.shape.w, sizeof(t.shape.w), h);
    return fnv1a(t.data.data(), static_cast<std::size_t>(t.size()) * sizeof(float), h);
}

/// B random crops of the style image, matched to the content batch size.
ImageTensor style_crops(const ImageTensor& style, Eigen::Index crop_h, Eigen::Index crop_w,
                        Eigen::Index batch, std::uint64_t seed, std::int64_t step) {
    ImageTensor src = style;
    if (src.shape.h < crop_h || src.shape.w < crop_w) {
        const double scale = std::max(static_cast<double>(crop_h) / src.shape.h,
                                      static_cast<double>(crop_w) / src.shape.w);
        src = resize_bilinear(src, std::max<int>(crop_h, static_cast<int>(std::ceil(src.shape.h * scale))),
                              std::max<int>(crop_w, static_cast<int>(std::ceil(src.shape.w * scale))));
    }
    Rng rng(derive_seed(seed, 0x7265616c, static_cast<std::uint64_t>(step)));
    ImageTensor out(Shape{batch, 3, crop_h, crop_w});
    out.range = ValueRange::Unit;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::Index oy = src.shape.h > crop_h ? rng.uniform_int(src.shape.h - crop_h + 1) : 0;
        const Eigen::Index ox = src.shape.w > crop_w ? rng.uniform_int(src.shape.w - crop_w + 1) : 0;
        for (int c = 0; c < 3; ++c) {
            const float* sp = src.plane(0, c);
            float* dp = out.plane(b, c);
            for (Eigen::Index y = 0; y < crop_h; ++y)
                std::copy_n(sp + (oy + y) * src.shape.w + ox, crop_w, dp + y * crop_w);
        }
    }
    return out;
}

/// Exclusive ownership of a run directory for the duration of a train() call.
class LockFile {
public:
    explicit LockFile(const std::filesystem::path& path) : path_(path) {
        fd_ = ::open(path.string().c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw StateError("run directory is locked by another training run (" + path.string() +
                             " exists); remove the lockfile if that run is gone");
    }
    ~LockFile() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

std::filesystem::path find_latest_checkpoint(const std::filesystem::path& run_dir) {
    std::filesystem::path best;
    std::int64_t best_step = -1;
    if (!std::filesystem::is_directory(run_dir)) return best;
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".ckpt") continue;
        const std::filesystem::path sidecar = entry.path().string() + ".json";
        if (!std::filesystem::exists(sidecar)) continue;
        try {
            std::ifstream f(sidecar);
            nlohmann::json meta;
            f >> meta;
            const auto step = meta.at("step").get<std::int64_t>();
            if (step > best_step) {
                best_step = step;
                best = entry.path();
            }
        } catch (...) {
            continue;  // unreadable sidecar: not a resume candidate
        }
    }
    return best;
}

std::string csv_row(std::int64_t step, const LossBundle& b) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g",
                  static_cast<long long>(step), b.content, b.style, b.adversarial, b.weighted_mse,
                  b.total);
    return buf;
}

/// Keep only rows for steps <= kept_steps (used when resuming mid-log).
void trim_loss_log(const std::filesystem::path& csv_path, std::int64_t kept_steps) {
    if (!std::filesystem::exists(csv_path)) return;
    std::ifstream in(csv_path);
    std::vector<std::string> kept;
    std::string line;
    while (std::getline(in, line)) {
        if (kept.empty() && line.rfind("step,", 0) == 0) {
            kept.push_back(line);
            continue;
        }
        const std::int64_t step = std::atoll(line.c_str());
        if (step <= kept_steps && step > 0) kept.push_back(line);
    }
    in.close();
    std::ofstream out(csv_path, std::ios::trunc);
    for (const auto& l : kept) out << l << "\n";
}

void validate_image_batch(const ImageTensor& t, const char* what) {
    if (t.shape.c != 3 || t.shape.b < 1)
        throw InvalidArgument(std::string(what) + ": expected (B,3,H,W), got " + t.shape.str());
    if (t.range != ValueRange::Unit)
        throw InvalidArgument(std::string(what) + ": expected unit-range values");
    if (!t.all_finite()) throw InvalidArgument(std::string(what) + ": non-finite values");
}

}  // namespace

TrainState init_train_state(const TrainingConfig& cfg) {
    cfg.validate();
    TrainState state;
    state.seed = cfg.seed;
    state.cfg_hash = config_hash(cfg);
    state.extractor_source = cfg.extractor_weights;
    state.generator = Generator<float>(cfg.generator_spec, cfg.seed);
    state.discriminator = Discriminator<float>(cfg.seed);
    state.extractor = cfg.extractor_weights.empty()
                          ? PerceptualExtractor<float>::random_init(derive_seed(cfg.seed, 0x657874))
                          : load_extractor(cfg.extractor_weights);
    state.gen_opt = Adam<float>(state.generator.parameters(), cfg.optimizer.lr,
                                cfg.optimizer.beta1, cfg.optimizer.beta2);
    state.disc_opt = Adam<float>(state.discriminator.parameters(), cfg.optimizer.lr,
                                 cfg.optimizer.beta1, cfg.optimizer.beta2);
    return state;
}

LossBundle train_step(TrainState& state, const ImageTensor& batch, const ImageTensor& style,
                      const TrainingConfig& cfg) {
    validate_image_batch(batch, "train_step batch");
    validate_image_batch(style, "train_step style");

    // weight map always comes from the content batch, never the output
    const EdgeWeightMap wmap = edge_weight_map(batch, cfg.blur_sigma);
    state.last_weight_map = wmap.weights;

    const std::uint64_t key = tensor_fingerprint(style);
    if (state.style_key != key) {
        state.style_stats = style_statistics(style, state.extractor);
        state.style_key = key;
    }

    // discriminator update: real = style crops, fake = detached stylization
    if (cfg.discriminator_mode == DiscriminatorMode::Joint) {
        const ImageTensor fake = state.generator.stylize(batch);
        const ImageTensor real =
            style_crops(style, batch.shape.h, batch.shape.w, batch.shape.b, state.seed, state.step);
        state.disc_opt.zero_grad();
        Variable<float> d_loss = adversarial_loss_d(state.discriminator.discriminate(constant(real)),
                                                    state.discriminator.discriminate(constant(fake)));
        d_loss.backward();
        state.disc_opt.step();
    }

    // generator update
    state.gen_opt.zero_grad();
    state.disc_opt.zero_grad();
    Variable<float> content_var = constant(batch);
    Variable<float> out = state.generator.stylize_graph(content_var, FusionCoefficients{1.0f, 1.0f});
    Variable<float> fake_scores = state.discriminator.discriminate(out);

    Variable<float> c = content_loss(out, content_var, state.extractor);
    Variable<float> s = style_loss(out, state.style_stats, state.extractor);
    Variable<float> a = adversarial_loss_g(fake_scores);
    Variable<float> w;
    if (cfg.iterative_mse) {
        // consecutive-iterate residual form of the weighted term
        Variable<float> out2 = state.generator.stylize_graph(out, FusionCoefficients{1.0f, 1.0f});
        w = weighted_mse_loss(out2, out, wmap);
    } else {
        w = weighted_mse_loss(out, content_var, wmap);
    }
    TotalLoss<float> total = combine_losses(c, s, a, w, cfg.loss_weights);

    if (!total.bundle.all_finite())
        throw TrainingDiverged("non-finite loss at step " + std::to_string(state.step + 1),
                               total.bundle);

    total.total.backward();
    state.gen_opt.step();
    state.disc_opt.zero_grad();  // drop discriminator grads accumulated through the G pass

    ++state.step;
    return total.bundle;
}

std::filesystem::path train(const TrainingConfig& cfg, const std::filesystem::path& run_dir) {
    cfg.validate();
    std::filesystem::create_directories(run_dir);
    LockFile lock(run_dir / ".lock");

    Dataset dataset(cfg.content_dir, cfg.crop_size, cfg.seed);
    const ImageTensor style = load_image(cfg.style_image);

    const std::int64_t steps_per_epoch =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(dataset.size()) / cfg.batch_size);
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

    TrainState state;
    const std::filesystem::path resume = find_latest_checkpoint(run_dir);
    if (!resume.empty()) {
        state = load_checkpoint(resume, cfg);
        std::cerr << "resuming from " << resume.string() << " at step " << state.step << "\n";
    } else {
        state = init_train_state(cfg);
    }

    const std::filesystem::path csv_path = run_dir / "loss_log.csv";
    trim_loss_log(csv_path, state.step);
    const bool fresh_log = !std::filesystem::exists(csv_path) || state.step == 0;
    std::ofstream csv(csv_path, fresh_log ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot open loss log: " + csv_path.string());
    if (fresh_log) csv << "step,content,style,adversarial,weighted_mse,total\n";

    while (state.step < total_steps) {
        const std::int64_t epoch = state.step / steps_per_epoch;
        const std::int64_t pos = state.step % steps_per_epoch;
        std::vector<ImageTensor> items;
        items.reserve(cfg.batch_size);
        for (int b = 0; b < cfg.batch_size; ++b)
            items.push_back(dataset.item(epoch, pos * cfg.batch_size + b));
        const ImageTensor batch = stack_batch(items);

        const LossBundle bundle = train_step(state, batch, style, cfg);
        csv << csv_row(state.step, bundle) << "\n";
        csv.flush();

        if (state.step % steps_per_epoch == 0) {
            state.epoch = state.step / steps_per_epoch;
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%04lld.ckpt",
                          static_cast<long long>(state.epoch));
            save_checkpoint(state, run_dir / name);
        }
    }

    const std::filesystem::path final_path = run_dir / "final.ckpt";
    save_checkpoint(state, final_path);
    return final_path;
}

}  // namespace rst
