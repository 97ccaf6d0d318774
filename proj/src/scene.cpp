// SPDX-License-Identifier: Apache-2.0

#include "marble/scene.hpp"

#include <algorithm>
#include <stdexcept>

namespace marble {

MaterialParams MaterialParams::concrete(double f_hz) {
  const double f_ghz = f_hz * 1e-9;
  return {"concrete", 5.24, 0.0462 * std::pow(f_ghz, 0.7822)};
}

MaterialParams MaterialParams::brick(double f_hz) {
  const double f_ghz = f_hz * 1e-9;
  return {"brick", 3.91, 0.0238 * std::pow(f_ghz, 0.16)};
}

bool Reflector::contains(Vec3 p, double tol) const { return interior_margin(p) >= -tol; }

double Reflector::interior_margin(Vec3 p) const {
  const Vec3 d = p - center;
  const double mu = half_u - std::abs(dot(d, axis_u));
  const double mv = half_v - std::abs(dot(d, axis_v));
  return std::min(mu, mv);
}

SceneId parse_scene_id(std::string_view name) {
  if (name == "los") return SceneId::los;
  if (name == "circle") return SceneId::circle;
  if (name == "rounded_l") return SceneId::rounded_l;
  if (name == "l") return SceneId::l;
  throw std::invalid_argument("unknown scene id '" + std::string(name) + "'");
}

std::string_view to_string(SceneId id) {
  switch (id) {
    case SceneId::los: return "los";
    case SceneId::circle: return "circle";
    case SceneId::rounded_l: return "rounded_l";
    case SceneId::l: return "l";
  }
  return "?";
}

const Reflector& Scene::reflector(std::uint32_t id) const {
  // ids are dense and ordered by construction
  if (id < reflectors.size() && reflectors[id].id == id) return reflectors[id];
  auto it = std::find_if(reflectors.begin(), reflectors.end(),
                         [id](const Reflector& r) { return r.id == id; });
  if (it == reflectors.end()) throw std::out_of_range("no reflector with id " + std::to_string(id));
  return *it;
}

Reflector make_wall(Vec3 a, Vec3 b, double z_min, double z_max, Vec3 facing,
                    const MaterialParams& material, std::uint32_t id) {
  a.z = b.z = 0.0;
  const Vec3 along = b - a;
  const double len = norm(along);
  if (!(len > 0.0)) throw std::invalid_argument("degenerate wall segment");
  Reflector r;
  r.id = id;
  r.kind = ReflectorKind::wall_segment;
  r.axis_u = (1.0 / len) * along;
  r.axis_v = {0.0, 0.0, 1.0};
  Vec3 n = normalized(cross(r.axis_v, r.axis_u));
  if (dot(n, facing) < 0.0) n = -1.0 * n;
  r.normal = n;
  r.center = 0.5 * (a + b) + Vec3{0.0, 0.0, 0.5 * (z_min + z_max)};
  r.half_u = 0.5 * len;
  r.half_v = 0.5 * (z_max - z_min);
  r.material = material;
  return r;
}

std::vector<Reflector> facetize_arc(Vec3 center, double radius, double az_begin, double az_end,
                                    double z_min, double z_max, double facet_deg,
                                    const MaterialParams& material, std::uint32_t first_id) {
  if (!(radius > 0.0)) throw std::invalid_argument("arc radius must be positive");
  if (!(az_end > az_begin)) throw std::invalid_argument("arc azimuth span is empty");
  if (!(facet_deg > 0.0)) throw std::invalid_argument("facet_deg must be positive");
  const double span_deg = rad2deg(az_end - az_begin);
  const auto count = static_cast<std::size_t>(std::ceil(span_deg / facet_deg - 1e-9));
  const double step = (az_end - az_begin) / static_cast<double>(count);

  std::vector<Reflector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double a0 = az_begin + step * static_cast<double>(k);
    const double a1 = (k + 1 == count) ? az_end : a0 + step;
    const Vec3 p0{center.x + radius * std::cos(a0), center.y + radius * std::sin(a0), 0.0};
    const Vec3 p1{center.x + radius * std::cos(a1), center.y + radius * std::sin(a1), 0.0};
    const Vec3 mid = 0.5 * (p0 + p1);
    const Vec3 inward{center.x - mid.x, center.y - mid.y, 0.0};
    out.push_back(make_wall(p0, p1, z_min, z_max, inward, material,
                            first_id + static_cast<std::uint32_t>(k)));
  }
  return out;
}

namespace {

Reflector ground_plane(const MaterialParams& concrete) {
  Reflector g;
  g.id = 0;
  g.kind = ReflectorKind::ground_plane;
  g.center = {0.0, 0.0, 0.0};
  g.normal = {0.0, 0.0, 1.0};
  g.axis_u = {1.0, 0.0, 0.0};
  g.axis_v = {0.0, 1.0, 0.0};
  g.half_u = 1000.0;
  g.half_v = 1000.0;
  g.material = concrete;
  return g;
}

}  // namespace

Scene build_scene(SceneId id, double facet_deg, double carrier_hz) {
  if (!(facet_deg > 0.0 && facet_deg <= 10.0))
    throw std::invalid_argument("facet_deg must lie in (0, 10]");
  const auto concrete = MaterialParams::concrete(carrier_hz);
  const auto brick = MaterialParams::brick(carrier_hz);
  const Vec3 origin{0.0, 0.0, 0.0};

  Scene s;
  s.scene_id = id;
  s.reflectors.push_back(ground_plane(concrete));
  auto next_id = [&s] { return static_cast<std::uint32_t>(s.reflectors.size()); };
  auto append = [&s](std::vector<Reflector> rs) {
    s.reflectors.insert(s.reflectors.end(), rs.begin(), rs.end());
  };

  switch (id) {
    case SceneId::los:
      break;
    case SceneId::circle:
      append(facetize_arc(origin, 300.0, deg2rad(-90.0), deg2rad(90.0), 0.0, kWallHeight,
                          facet_deg, brick, next_id()));
      break;
    case SceneId::rounded_l:
      append(facetize_arc(origin, 300.0, 0.0, deg2rad(90.0), 0.0, kWallHeight, facet_deg, brick,
                          next_id()));
      s.reflectors.push_back(make_wall({300.0, 0.0, 0.0}, {300.0, -400.0, 0.0}, 0.0, kWallHeight,
                                       {-1.0, 0.0, 0.0}, brick, next_id()));
      break;
    case SceneId::l:
      s.reflectors.push_back(make_wall({205.0, -400.0, 0.0}, {205.0, 400.0, 0.0}, 0.0,
                                       kWallHeight, {-1.0, 0.0, 0.0}, brick, next_id()));
      s.reflectors.push_back(make_wall({-400.0, 180.0, 0.0}, {400.0, 180.0, 0.0}, 0.0,
                                       kWallHeight, {0.0, -1.0, 0.0}, brick, next_id()));
      break;
  }
  return s;
}

Vec3 sample_position(std::uint64_t seed, std::uint64_t index, const SamplingRegion& region) {
  Rng rng(stream_key(seed, index, /*domain=*/1));
  const double u_r = rng.uniform();
  const double u_az = rng.uniform();
  const double r0 = region.range_min_m, r1 = region.range_max_m;
  const double r = region.uniform_in_area ? std::sqrt(r0 * r0 + (r1 * r1 - r0 * r0) * u_r)
                                          : r0 + (r1 - r0) * u_r;
  const double az = deg2rad(region.az_min_deg + (region.az_max_deg - region.az_min_deg) * u_az);
  return {r * std::cos(az), r * std::sin(az), region.height_m};
}

}  // namespace marble
