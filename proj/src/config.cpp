// SPDX-License-Identifier: Apache-2.0

#include "marble/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace marble {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument(std::string("unknown key '") + it.key() + "' in " + where);
}

}  // namespace

json to_json(const PhysicsSnapshot& p) {
  return {{"f0_hz", p.grid.f0},
          {"delta_f_hz", p.grid.delta_f},
          {"num_subcarriers", p.grid.M},
          {"num_antennas", p.array.N_r},
          {"spacing_m", p.array.spacing_m},
          {"p_t_dbm", p.p_t_dbm},
          {"noise_figure_db", p.noise_figure_db},
          {"epsilon", p.epsilon}};
}

PhysicsSnapshot physics_from_json(const json& j, PhysicsSnapshot p) {
  reject_unknown(j, {"f0_hz", "delta_f_hz", "num_subcarriers", "num_antennas", "spacing_m",
                     "p_t_dbm", "noise_figure_db", "epsilon"},
                 "physics");
  const bool f0_given = j.contains("f0_hz");
  p.grid.f0 = j.value("f0_hz", p.grid.f0);
  p.grid.delta_f = j.value("delta_f_hz", p.grid.delta_f);
  p.grid.M = j.value("num_subcarriers", p.grid.M);
  p.array.N_r = j.value("num_antennas", p.array.N_r);
  // half-wave spacing follows the carrier unless given explicitly
  if (j.contains("spacing_m"))
    p.array.spacing_m = j.at("spacing_m").get<double>();
  else if (f0_given)
    p.array.spacing_m = kSpeedOfLight / p.grid.f0 / 2.0;
  p.p_t_dbm = j.value("p_t_dbm", p.p_t_dbm);
  p.noise_figure_db = j.value("noise_figure_db", p.noise_figure_db);
  p.epsilon = j.value("epsilon", p.epsilon);
  p.grid.validate();
  p.array.validate();
  return p;
}

json to_json(const SamplingRegion& r) {
  return {{"range_min_m", r.range_min_m}, {"range_max_m", r.range_max_m},
          {"az_min_deg", r.az_min_deg},   {"az_max_deg", r.az_max_deg},
          {"height_m", r.height_m},       {"uniform_in_area", r.uniform_in_area}};
}

SamplingRegion region_from_json(const json& j, SamplingRegion r) {
  r.range_min_m = j.value("range_min_m", r.range_min_m);
  r.range_max_m = j.value("range_max_m", r.range_max_m);
  r.az_min_deg = j.value("az_min_deg", r.az_min_deg);
  r.az_max_deg = j.value("az_max_deg", r.az_max_deg);
  r.height_m = j.value("height_m", r.height_m);
  r.uniform_in_area = j.value("uniform_in_area", r.uniform_in_area);
  if (!(r.range_min_m >= 0.0 && r.range_max_m > r.range_min_m))
    throw std::invalid_argument("range_min_m/range_max_m do not form a valid interval");
  if (!(r.az_max_deg > r.az_min_deg)) throw std::invalid_argument("az_min_deg must be below az_max_deg");
  return r;
}

GenerationConfig generation_config_from_json(const json& j, GenerationConfig cfg) {
  reject_unknown(j, {"scene_id", "facet_deg", "range_min_m", "range_max_m", "az_min_deg",
                     "az_max_deg", "height_m", "uniform_in_area", "max_depth", "physics"},
                 "experiment config");
  if (j.contains("scene_id")) cfg.scene_id = parse_scene_id(j.at("scene_id").get<std::string>());
  cfg.facet_deg = j.value("facet_deg", cfg.facet_deg);
  cfg.region = region_from_json(j, cfg.region);
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  if (j.contains("physics")) cfg.physics = physics_from_json(j.at("physics"), cfg.physics);
  return cfg;
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

PhysicsSnapshot desk_scale_physics() {
  PhysicsSnapshot p;
  p.grid = {kCarrierHz, 1.485e6, 256};
  p.array = ArrayConfig::half_wave(64, kCarrierHz);
  return p;
}

}  // namespace marble
