// Copyright (c) 2026 The regionstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "rst/network.hpp"

namespace rst::detail {

inline nlohmann::json spec_to_json(const GeneratorSpec& s) {
    return nlohmann::json{{"base_channels", s.base_channels},
                          {"downsample_factor", s.downsample_factor},
                          {"unet_depth", s.unet_depth},
                          {"norm_kind", s.norm_kind == NormKind::Instance ? "instance" : "none"}};
}

inline GeneratorSpec spec_from_json(const nlohmann::json& j) {
    GeneratorSpec s;
    s.base_channels = j.at("base_channels").get<int>();
    s.downsample_factor = j.at("downsample_factor").get<int>();
    s.unet_depth = j.at("unet_depth").get<int>();
    const std::string norm = j.at("norm_kind").get<std::string>();
    if (norm == "instance")
        s.norm_kind = NormKind::Instance;
    else if (norm == "none")
        s.norm_kind = NormKind::None;
    else
        throw InvalidArgument("norm_kind must be 'instance' or 'none', got '" + norm + "'");
    return s;
}

}  // namespace rst::detail
