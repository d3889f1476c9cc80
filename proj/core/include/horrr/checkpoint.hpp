// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "horrr/tucker_point.hpp"

namespace horrr {

// Directory layout: manifest.json, core.bin, factor_<i>.bin (HORT format).
// `metadata` is stored under the "metadata" key of the manifest.
void save_point(const std::filesystem::path& dir, const TuckerPoint& p,
                const nlohmann::json& metadata = nlohmann::json::object());

struct LoadedPoint {
  TuckerPoint point;
  nlohmann::json manifest;
};

LoadedPoint load_point(const std::filesystem::path& dir);

}  // namespace horrr
