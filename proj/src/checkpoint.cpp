// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint = tensor archive (generator, discriminator, optimizer moments)
// with embedded JSON metadata, plus a human-readable `.json` sidecar carrying
// the same metadata.

#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "rst/serialize.hpp"
#include "rst/training.hpp"
#include "spec_json.hpp"

namespace rst {

namespace {

using nlohmann::json;

json checkpoint_meta(const TrainState& state) {
    json extractor;
    if (state.extractor.stage_widths().empty())
        throw StateError("checkpoint: extractor not initialized");
    extractor["widths"] = state.extractor.stage_widths();
    extractor["mode"] = state.extractor_source.empty() ? "random" : "file";
    extractor["path"] = state.extractor_source.string();
    return json{
        {"format", 1},
        {"kind", "checkpoint"},
        {"generator_spec", detail::spec_to_json(state.generator.spec())},
        {"step", state.step},
        {"epoch", state.epoch},
        {"seed", state.seed},
        {"config_hash", state.cfg_hash},
        {"adam_t_gen", state.gen_opt.step_count()},
        {"adam_t_disc", state.disc_opt.step_count()},
        {"extractor", extractor},
    };
}

void append_params(std::vector<ArchiveEntry>& out, const std::string& prefix,
                   const std::vector<NamedParam<float>>& params) {
    for (const auto& p : params) out.push_back({prefix + p.name, p.var.value()});
}

void append_moments(std::vector<ArchiveEntry>& out, const std::string& prefix,
                    const Adam<float>& opt) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        out.push_back({prefix + "m/" + params[i].name, opt.moments_m()[i]});
        out.push_back({prefix + "v/" + params[i].name, opt.moments_v()[i]});
    }
}

class EntryMap {
public:
    explicit EntryMap(const TensorArchive& archive, std::string context)
        : context_(std::move(context)) {
        for (const auto& e : archive.entries) map_[e.name] = &e.tensor;
    }

    const Tensor<float>& get(const std::string& name) const {
        auto it = map_.find(name);
        if (it == map_.end())
            throw CorruptCheckpoint("missing tensor '" + name + "' in " + context_);
        return *it->second;
    }

private:
    std::map<std::string, const Tensor<float>*> map_;
    std::string context_;
};

void restore_params(const EntryMap& entries, const std::string& prefix,
                    const std::vector<NamedParam<float>>& params, const std::string& context) {
    for (const auto& p : params) {
        const Tensor<float>& t = entries.get(prefix + p.name);
        if (!(t.shape == p.var.shape()))
            throw CorruptCheckpoint("tensor '" + prefix + p.name + "' has shape " + t.shape.str() +
                                    ", expected " + p.var.shape().str() + " in " + context);
        const_cast<Variable<float>&>(p.var).mutable_value().data = t.data;
    }
}

void restore_moments(const EntryMap& entries, const std::string& prefix, Adam<float>& opt,
                     const std::string& context) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<float>& m = entries.get(prefix + "m/" + params[i].name);
        const Tensor<float>& v = entries.get(prefix + "v/" + params[i].name);
        if (!(m.shape == params[i].var.shape()) || !(v.shape == params[i].var.shape()))
            throw CorruptCheckpoint("optimizer moment shape mismatch for '" + params[i].name +
                                    "' in " + context);
        opt.moments_m()[i] = m;
        opt.moments_v()[i] = v;
    }
}

json parse_meta(const std::string& meta_json, const std::string& context) {
    try {
        return json::parse(meta_json);
    } catch (const json::exception&) {
        throw CorruptCheckpoint("unparseable metadata in " + context);
    }
}

PerceptualExtractor<float> extractor_from_meta(const json& meta, std::uint64_t seed) {
    const json& e = meta.at("extractor");
    const std::string mode = e.at("mode").get<std::string>();
    if (mode == "file") return load_extractor(e.at("path").get<std::string>());
    return PerceptualExtractor<float>::random_init(seed, e.at("widths").get<std::vector<int>>());
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
    std::vector<ArchiveEntry> entries;
    append_params(entries, "gen/", state.generator.parameters());
    append_params(entries, "disc/", state.discriminator.parameters());
    append_moments(entries, "optg/", state.gen_opt);
    append_moments(entries, "optd/", state.disc_opt);
    const std::string meta = checkpoint_meta(state).dump();
    write_tensor_archive(path, meta, entries);

    std::ofstream sidecar(path.string() + ".json", std::ios::trunc);
    if (!sidecar) throw IoError("cannot write checkpoint sidecar: " + path.string() + ".json");
    sidecar << checkpoint_meta(state).dump(2) << "\n";
}

TrainState load_checkpoint(const std::filesystem::path& path, const TrainingConfig& cfg) {
    const TensorArchive archive = read_tensor_archive(path);
    const json meta = parse_meta(archive.meta_json, path.string());

    const GeneratorSpec archived_spec = detail::spec_from_json(meta.at("generator_spec"));
    if (!(archived_spec == cfg.generator_spec))
        throw IncompatibleCheckpoint("checkpoint generator spec does not match the configured one: " +
                                     path.string());
    const std::string archived_hash = meta.value("config_hash", "");
    if (!archived_hash.empty() && archived_hash != config_hash(cfg))
        std::cerr << "warning: checkpoint " << path.string()
                  << " was written under a different config (hash mismatch)\n";

    TrainState state = init_train_state(cfg);
    state.step = meta.at("step").get<std::int64_t>();
    state.epoch = meta.at("epoch").get<std::int64_t>();
    state.seed = meta.at("seed").get<std::uint64_t>();
    state.extractor = extractor_from_meta(meta, derive_seed(state.seed, 0x657874));

    const EntryMap entries(archive, path.string());
    restore_params(entries, "gen/", state.generator.parameters(), path.string());
    restore_params(entries, "disc/", state.discriminator.parameters(), path.string());
    restore_moments(entries, "optg/", state.gen_opt, path.string());
    restore_moments(entries, "optd/", state.disc_opt, path.string());
    state.gen_opt.set_step_count(meta.at("adam_t_gen").get<std::int64_t>());
    state.disc_opt.set_step_count(meta.at("adam_t_disc").get<std::int64_t>());
    return state;
}

LoadedGenerator load_generator(const std::filesystem::path& path) {
    const TensorArchive archive = read_tensor_archive(path);
    const json meta = parse_meta(archive.meta_json, path.string());
    LoadedGenerator out;
    out.spec = detail::spec_from_json(meta.at("generator_spec"));
    out.step = meta.value("step", std::int64_t(0));
    out.generator = Generator<float>(out.spec, meta.value("seed", std::uint64_t(0)));
    const EntryMap entries(archive, path.string());
    restore_params(entries, "gen/", out.generator.parameters(), path.string());
    return out;
}

PerceptualExtractor<float> load_extractor(const std::filesystem::path& path) {
    const TensorArchive archive = read_tensor_archive(path);
    std::vector<std::pair<std::string, Tensor<float>>> entries;
    for (const auto& e : archive.entries) entries.emplace_back(e.name, e.tensor);
    return PerceptualExtractor<float>::from_weights(entries);
}

void save_extractor(const PerceptualExtractor<float>& extractor,
                    const std::filesystem::path& path) {
    std::vector<ArchiveEntry> entries;
    for (const auto& p : extractor.weight_entries()) entries.push_back({p.name, p.var.value()});
    write_tensor_archive(path, nlohmann::json{{"kind", "extractor"}}.dump(), entries);
}

}  // namespace rst
