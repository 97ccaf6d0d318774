// SPDX-License-Identifier: Apache-2.0
//
// JSON experiment configuration. Every field is optional; absent fields keep
// the full-scale defaults (128 antennas, 1584 subcarriers).

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "marble/dataset.hpp"

namespace marble {

using json = nlohmann::json;

json to_json(const PhysicsSnapshot& p);
PhysicsSnapshot physics_from_json(const json& j, PhysicsSnapshot base = {});

json to_json(const SamplingRegion& r);
SamplingRegion region_from_json(const json& j, SamplingRegion base = {});

/// Reads scene_id, facet_deg, range_min_m, range_max_m, az_min_deg,
/// az_max_deg, max_depth and a "physics" object (f0_hz, delta_f_hz,
/// num_subcarriers, num_antennas, spacing_m, p_t_dbm, noise_figure_db,
/// epsilon). Unknown keys are rejected.
GenerationConfig generation_config_from_json(const json& j, GenerationConfig base = {});

json load_json_file(const std::filesystem::path& path);

/// Desk-scale physics: 64 antennas, 256 subcarriers at 1.485 MHz.
PhysicsSnapshot desk_scale_physics();

}  // namespace marble
