// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "rst/training.hpp"
#include "support.hpp"

using namespace rst;
using rst::testing::TempDir;

namespace {

const std::filesystem::path kFixtures = RST_FIXTURES_DIR;

/// Small config against the bundled corpus; cheap enough for unit tests.
TrainingConfig tiny_config(std::uint64_t seed = 7) {
    TrainingConfig cfg;
    cfg.content_dir = kFixtures / "content";
    cfg.style_image = kFixtures / "style.png";
    cfg.crop_size = 32;
    cfg.batch_size = 4;
    cfg.epochs = 1;
    cfg.seed = seed;
    cfg.generator_spec.base_channels = 16;
    cfg.generator_spec.downsample_factor = 4;
    cfg.generator_spec.unet_depth = 2;
    cfg.loss_weights = LossWeights{1, 10, 1, 50};
    cfg.blur_sigma = 1.0f;
    return cfg;
}

ImageTensor probe_batch(int crop = 32, std::uint64_t seed = 99) {
    Rng rng(seed);
    ImageTensor t = Tensor<float>::random_uniform({2, 3, crop, crop}, rng, 0.0f, 1.0f);
    t.range = ValueRange::Unit;
    return t;
}

std::vector<Tensor<float>> snapshot(const std::vector<NamedParam<float>>& params) {
    std::vector<Tensor<float>> out;
    for (const auto& p : params) out.push_back(p.var.value());
    return out;
}

bool identical(const std::vector<Tensor<float>>& a, const std::vector<NamedParam<float>>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((a[i].data - b[i].var.value().data).abs().maxCoeff() != 0.0f) return false;
    return true;
}

}  // namespace

TEST_CASE("config round-trips losslessly and rejects unknown keys") {
    TempDir tmp("rst_cfg");
    TrainingConfig cfg = tiny_config();
    cfg.optimizer.lr = 3.14159e-4;
    cfg.blur_sigma = 0.75f;
    cfg.iterative_mse = true;
    cfg.discriminator_mode = DiscriminatorMode::FrozenPretrained;
    const auto path = tmp.path() / "cfg.json";
    save_training_config(cfg, path);
    TrainingConfig back = load_training_config(path);
    CHECK(training_config_json(back) == training_config_json(cfg));
    CHECK(config_hash(back) == config_hash(cfg));

    TrainingConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(config_hash(other) != config_hash(cfg));

    // unknown key
    std::ofstream(tmp.path() / "bad.json")
        << R"({"content_dir":"x","style_image":"y","crop_size":32,"batch_size":1,"epochs":1,)"
        << R"("optimizer":{"kind":"adam","lr":1e-4,"betas":[0.5,0.999]},)"
        << R"("loss_weights":{"content":1,"style":1,"adversarial":1,"weighted_mse":1},)"
        << R"("blur_sigma":1.0,"seed":0,"generator_spec":{"base_channels":16,)"
        << R"("downsample_factor":4,"unet_depth":2,"norm_kind":"instance"},)"
        << R"("discriminator_mode":"joint","iterative_mse":false,"surprise":1})";
    CHECK_THROWS_WITH_AS(load_training_config(tmp.path() / "bad.json"),
                         doctest::Contains("surprise"), InvalidArgument);

    // missing key
    std::ofstream(tmp.path() / "missing.json") << R"({"content_dir":"x"})";
    CHECK_THROWS_AS(load_training_config(tmp.path() / "missing.json"), InvalidArgument);
    CHECK_THROWS_AS(load_training_config(tmp.path() / "nope.json"), NotFound);
}

TEST_CASE("config validation") {
    TrainingConfig cfg = tiny_config();
    cfg.crop_size = 30;  // not a multiple of 16
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = tiny_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = tiny_config();
    cfg.optimizer.lr = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = tiny_config();
    cfg.loss_weights.style = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("dataset: shapes, determinism, corrupt files skipped") {
    TempDir tmp("rst_data");
    // 9 valid + 1 corrupt
    for (int i = 0; i < 8; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "c%d.png", i);
        std::filesystem::copy_file(kFixtures / "content" / name, tmp.path() / name);
    }
    std::filesystem::copy_file(kFixtures / "holdout" / "h0.png", tmp.path() / "h0.png");
    std::ofstream(tmp.path() / "broken.png") << "not a png at all";

    Dataset ds(tmp.path(), 64, 5);
    CHECK(ds.size() == 9);

    for (std::int64_t i = 0; i < 3; ++i) {
        ImageTensor item = ds.item(0, i);
        CHECK(item.shape == Shape{1, 3, 64, 64});
        CHECK(item.data.minCoeff() >= 0.0f);
        CHECK(item.data.maxCoeff() <= 1.0f);
    }

    Dataset ds2(tmp.path(), 64, 5);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(ds.size()); ++i) {
        ImageTensor a = ds.item(0, i);
        ImageTensor b = ds2.item(0, i);
        CHECK((a.data - b.data).abs().maxCoeff() == 0.0f);
    }

    Dataset ds3(tmp.path(), 64, 6);  // different seed shuffles differently
    bool any_diff = false;
    for (std::int64_t i = 0; i < 4 && !any_diff; ++i)
        any_diff = (ds.item(0, i).data - ds3.item(0, i).data).abs().maxCoeff() > 0;
    CHECK(any_diff);

    TempDir empty("rst_empty");
    CHECK_THROWS_AS(Dataset(empty.path(), 64, 0), NotFound);
    CHECK_THROWS_AS(Dataset(tmp.path() / "nodir", 64, 0), NotFound);
}

TEST_CASE("train_step: determinism across identical fresh states") {
    TrainingConfig cfg = tiny_config(11);
    const ImageTensor batch = probe_batch();
    const ImageTensor style = load_image(kFixtures / "style.png", std::make_pair(64, 64));

    TrainState s1 = init_train_state(cfg);
    TrainState s2 = init_train_state(cfg);
    LossBundle b1, b2;
    for (int i = 0; i < 2; ++i) b1 = train_step(s1, batch, style, cfg);
    for (int i = 0; i < 2; ++i) b2 = train_step(s2, batch, style, cfg);
    CHECK(b1.total == b2.total);
    CHECK(identical(snapshot(s1.generator.parameters()), s2.generator.parameters()));
    CHECK(identical(snapshot(s1.discriminator.parameters()), s2.discriminator.parameters()));
    CHECK(s1.step == 2);
}

TEST_CASE("train_step: all-zero loss weights leave the generator unchanged") {
    TrainingConfig cfg = tiny_config(12);
    cfg.loss_weights = LossWeights{0, 0, 0, 0};
    TrainState state = init_train_state(cfg);
    const auto before = snapshot(state.generator.parameters());
    train_step(state, probe_batch(), load_image(kFixtures / "style.png"), cfg);
    CHECK(identical(before, state.generator.parameters()));
}

TEST_CASE("train_step: returned bundle is finite and total matches components") {
    TrainingConfig cfg = tiny_config(13);
    TrainState state = init_train_state(cfg);
    LossBundle b = train_step(state, probe_batch(), load_image(kFixtures / "style.png"), cfg);
    CHECK(b.all_finite());
    const double dot = b.weights.content * b.content + b.weights.style * b.style +
                       b.weights.adversarial * b.adversarial +
                       b.weights.weighted_mse * b.weighted_mse;
    CHECK(b.total == doctest::Approx(dot).epsilon(1e-9));
}

TEST_CASE("parameter isolation between the two updates") {
    TrainingConfig cfg = tiny_config(14);
    TrainState state = init_train_state(cfg);
    const ImageTensor batch = probe_batch();

    // discriminator-side update must not gradient the generator
    const ImageTensor fake = state.generator.stylize(batch);
    state.disc_opt.zero_grad();
    state.gen_opt.zero_grad();
    adversarial_loss_d(state.discriminator.discriminate(constant(fake)),
                       state.discriminator.discriminate(constant(fake)))
        .backward();
    for (const auto& p : state.generator.parameters())
        CHECK(p.var.grad().data.abs().maxCoeff() == 0.0f);

    // frozen mode: the generator update must not move discriminator weights
    TrainingConfig frozen = cfg;
    frozen.discriminator_mode = DiscriminatorMode::FrozenPretrained;
    TrainState fstate = init_train_state(frozen);
    const auto disc_before = snapshot(fstate.discriminator.parameters());
    train_step(fstate, batch, load_image(kFixtures / "style.png"), frozen);
    CHECK(identical(disc_before, fstate.discriminator.parameters()));

    // joint mode: both nets move
    const auto gen_before = snapshot(state.generator.parameters());
    const auto disc_before2 = snapshot(state.discriminator.parameters());
    train_step(state, batch, load_image(kFixtures / "style.png"), cfg);
    CHECK_FALSE(identical(gen_before, state.generator.parameters()));
    CHECK_FALSE(identical(disc_before2, state.discriminator.parameters()));
}

TEST_CASE("weight map comes from the content batch, not the stylized output") {
    TrainingConfig cfg = tiny_config(15);
    TrainState state = init_train_state(cfg);
    const ImageTensor batch = probe_batch();
    const ImageTensor out_before = state.generator.stylize(batch);
    train_step(state, batch, load_image(kFixtures / "style.png"), cfg);

    const EdgeWeightMap from_batch = edge_weight_map(batch, cfg.blur_sigma);
    CHECK((state.last_weight_map.data - from_batch.weights.data).abs().maxCoeff() == 0.0f);
    const EdgeWeightMap from_output = edge_weight_map(out_before, cfg.blur_sigma);
    CHECK((state.last_weight_map.data - from_output.weights.data).abs().maxCoeff() > 0.0f);
}

TEST_CASE("checkpoint round-trip restores stylization bit-identically") {
    TempDir tmp("rst_ckpt");
    TrainingConfig cfg = tiny_config(16);
    TrainState state = init_train_state(cfg);
    const ImageTensor batch = probe_batch();
    train_step(state, batch, load_image(kFixtures / "style.png"), cfg);

    const ImageTensor before = state.generator.stylize(batch);
    const auto path = tmp.path() / "state.ckpt";
    save_checkpoint(state, path);
    CHECK(std::filesystem::exists(tmp.path() / "state.ckpt.json"));

    TrainState restored = load_checkpoint(path, cfg);
    CHECK(restored.step == state.step);
    const ImageTensor after = restored.generator.stylize(batch);
    CHECK(std::memcmp(before.data.data(), after.data.data(), sizeof(float) * before.size()) == 0);
}

TEST_CASE("checkpoint guards: spec mismatch and truncation") {
    TempDir tmp("rst_ckpt2");
    TrainingConfig cfg = tiny_config(17);
    TrainState state = init_train_state(cfg);
    const auto path = tmp.path() / "state.ckpt";
    save_checkpoint(state, path);

    TrainingConfig other = cfg;
    other.generator_spec.base_channels = 32;
    CHECK_THROWS_AS(load_checkpoint(path, other), IncompatibleCheckpoint);

    // truncate the archive to half
    const auto half = tmp.path() / "half.ckpt";
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(half, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(half, cfg), CorruptCheckpoint);
    CHECK_THROWS_AS(load_checkpoint(tmp.path() / "none.ckpt", cfg), NotFound);
}

TEST_CASE("train(): bookkeeping for one epoch") {
    TempDir tmp("rst_train");
    TrainingConfig cfg = tiny_config(18);
    cfg.epochs = 1;  // 8 images / batch 4 -> 2 steps
    const auto final_path = train(cfg, tmp.path() / "run");

    CHECK(std::filesystem::exists(final_path));
    CHECK(std::filesystem::exists(tmp.path() / "run" / "epoch_0001.ckpt"));
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "run" / ".lock"));

    std::ifstream csv(tmp.path() / "run" / "loss_log.csv");
    std::string line;
    int rows = 0;
    bool header = false;
    while (std::getline(csv, line)) {
        if (line.rfind("step,", 0) == 0)
            header = true;
        else if (!line.empty())
            ++rows;
    }
    CHECK(header);
    CHECK(rows == 2);

    LoadedGenerator lg = load_generator(final_path);
    CHECK(lg.step == 2);
    CHECK(lg.spec == cfg.generator_spec);
}

TEST_CASE("train(): resume mid-epoch reaches the same final state") {
    TempDir tmp("rst_resume");
    TrainingConfig cfg = tiny_config(19);
    cfg.epochs = 2;  // 4 steps total

    // uninterrupted reference
    const auto ref_final = train(cfg, tmp.path() / "ref");
    TrainState ref = load_checkpoint(ref_final, cfg);

    // interrupted: run 1 step manually (mid-epoch), checkpoint, then resume
    Dataset ds(cfg.content_dir, cfg.crop_size, cfg.seed);
    const ImageTensor style = load_image(cfg.style_image);
    TrainState partial = init_train_state(cfg);
    std::vector<ImageTensor> items;
    for (int b = 0; b < cfg.batch_size; ++b) items.push_back(ds.item(0, b));
    train_step(partial, stack_batch(items), style, cfg);
    std::filesystem::create_directories(tmp.path() / "res");
    save_checkpoint(partial, tmp.path() / "res" / "step_0001.ckpt");

    const auto res_final = train(cfg, tmp.path() / "res");
    TrainState resumed = load_checkpoint(res_final, cfg);

    CHECK(resumed.step == ref.step);
    const ImageTensor probe = probe_batch();
    const ImageTensor a = ref.generator.stylize(probe);
    const ImageTensor b = resumed.generator.stylize(probe);
    CHECK((a.data - b.data).abs().maxCoeff() <= 1e-5f);
}

TEST_CASE("train(): lockfile blocks concurrent runs") {
    TempDir tmp("rst_lock");
    TrainingConfig cfg = tiny_config(20);
    std::filesystem::create_directories(tmp.path() / "run");
    std::ofstream(tmp.path() / "run" / ".lock") << "held";
    CHECK_THROWS_AS(train(cfg, tmp.path() / "run"), StateError);
}

TEST_CASE("invalid batches are rejected") {
    TrainingConfig cfg = tiny_config(21);
    TrainState state = init_train_state(cfg);
    ImageTensor bad = probe_batch();
    bad.range = ValueRange::Signed;
    CHECK_THROWS_AS(train_step(state, bad, load_image(kFixtures / "style.png"), cfg),
                    InvalidArgument);
    ImageTensor nan_batch = probe_batch();
    nan_batch.data[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train_step(state, nan_batch, load_image(kFixtures / "style.png"), cfg),
                    InvalidArgument);
}
