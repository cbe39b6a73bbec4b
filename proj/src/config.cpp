// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rst/training.hpp"
#include "spec_json.hpp"

namespace rst {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw InvalidArgument("config: unknown key '" + it.key() + "' in " + where);
}

json config_to_json(const TrainingConfig& c) {
    return json{
        {"content_dir", c.content_dir.string()},
        {"style_image", c.style_image.string()},
        {"crop_size", c.crop_size},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"optimizer",
         {{"kind", "adam"}, {"lr", c.optimizer.lr}, {"betas", {c.optimizer.beta1, c.optimizer.beta2}}}},
        {"loss_weights",
         {{"content", c.loss_weights.content},
          {"style", c.loss_weights.style},
          {"adversarial", c.loss_weights.adversarial},
          {"weighted_mse", c.loss_weights.weighted_mse}}},
        {"blur_sigma", c.blur_sigma},
        {"seed", c.seed},
        {"generator_spec", detail::spec_to_json(c.generator_spec)},
        {"discriminator_mode",
         c.discriminator_mode == DiscriminatorMode::Joint ? "joint" : "frozen_pretrained"},
        {"iterative_mse", c.iterative_mse},
        {"extractor_weights", c.extractor_weights.string()},
    };
}

TrainingConfig config_from_json(const json& j) {
    check_keys(j,
               {"content_dir", "style_image", "crop_size", "batch_size", "epochs", "optimizer",
                "loss_weights", "blur_sigma", "seed", "generator_spec", "discriminator_mode",
                "iterative_mse", "extractor_weights"},
               "config");
    TrainingConfig c;
    c.content_dir = j.at("content_dir").get<std::string>();
    c.style_image = j.at("style_image").get<std::string>();
    c.crop_size = j.at("crop_size").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();

    const json& opt = j.at("optimizer");
    check_keys(opt, {"kind", "lr", "betas"}, "optimizer");
    if (opt.at("kind").get<std::string>() != "adam")
        throw InvalidArgument("config: optimizer.kind must be 'adam'");
    c.optimizer.lr = opt.at("lr").get<double>();
    const json& betas = opt.at("betas");
    if (!betas.is_array() || betas.size() != 2)
        throw InvalidArgument("config: optimizer.betas must be a pair");
    c.optimizer.beta1 = betas[0].get<double>();
    c.optimizer.beta2 = betas[1].get<double>();

    const json& lw = j.at("loss_weights");
    check_keys(lw, {"content", "style", "adversarial", "weighted_mse"}, "loss_weights");
    c.loss_weights.content = lw.at("content").get<double>();
    c.loss_weights.style = lw.at("style").get<double>();
    c.loss_weights.adversarial = lw.at("adversarial").get<double>();
    c.loss_weights.weighted_mse = lw.at("weighted_mse").get<double>();

    c.blur_sigma = j.at("blur_sigma").get<float>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.generator_spec = detail::spec_from_json(j.at("generator_spec"));

    const std::string mode = j.at("discriminator_mode").get<std::string>();
    if (mode == "joint")
        c.discriminator_mode = DiscriminatorMode::Joint;
    else if (mode == "frozen_pretrained")
        c.discriminator_mode = DiscriminatorMode::FrozenPretrained;
    else
        throw InvalidArgument("config: discriminator_mode must be 'joint' or 'frozen_pretrained'");

    c.iterative_mse = j.at("iterative_mse").get<bool>();
    if (j.contains("extractor_weights"))
        c.extractor_weights = j.at("extractor_weights").get<std::string>();
    return c;
}

}  // namespace

void TrainingConfig::validate() const {
    generator_spec.validate();
    loss_weights.validate();
    const int mult = generator_spec.required_multiple();
    if (crop_size < mult || crop_size % mult != 0)
        throw InvalidArgument("config: crop_size must be a positive multiple of " +
                              std::to_string(mult));
    if (batch_size < 1) throw InvalidArgument("config: batch_size must be >= 1");
    if (epochs < 1) throw InvalidArgument("config: epochs must be >= 1");
    if (optimizer.lr <= 0) throw InvalidArgument("config: optimizer.lr must be > 0");
    if (blur_sigma < 0) throw InvalidArgument("config: blur_sigma must be >= 0");
    if (content_dir.empty()) throw InvalidArgument("config: content_dir is required");
    if (style_image.empty()) throw InvalidArgument("config: style_image is required");
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw NotFound("no such config file: " + path.string());
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw InvalidArgument("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const json::exception& e) {
        throw InvalidArgument("config: " + std::string(e.what()));
    }
}

void save_training_config(const TrainingConfig& cfg, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write config: " + path.string());
    f << config_to_json(cfg).dump(2) << "\n";
}

std::string training_config_json(const TrainingConfig& cfg) {
    return config_to_json(cfg).dump();  // nlohmann orders keys, so this is canonical
}

std::string config_hash(const TrainingConfig& cfg) {
    const std::string canon = training_config_json(cfg);
    std::ostringstream os;
    os << std::hex << fnv1a(canon.data(), canon.size());
    return os.str();
}

}  // namespace rst
