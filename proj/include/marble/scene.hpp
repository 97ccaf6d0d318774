// SPDX-License-Identifier: Apache-2.0
//
// Evaluation scenes built from planar reflectors, plus target sampling
// over the deployment sector.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "marble/common.hpp"

namespace marble {

struct MaterialParams {
  std::string name;
  double rel_permittivity = 1.0;  // real part
  double conductivity = 0.0;      // S/m at the carrier

  /// ITU-style parametrization sigma = c * f_GHz^d.
  static MaterialParams concrete(double f_hz);
  static MaterialParams brick(double f_hz);
};

enum class ReflectorKind : std::uint8_t { ground_plane, wall_segment };

/// Planar rectangle. Points inside satisfy |(p - center).u| <= half_u and
/// |(p - center).v| <= half_v, with (u, v, normal) orthonormal.
struct Reflector {
  std::uint32_t id = 0;
  ReflectorKind kind = ReflectorKind::wall_segment;
  Vec3 center;
  Vec3 normal;
  Vec3 axis_u;  // horizontal tangent for walls, +x for the ground
  Vec3 axis_v;  // +z for walls, +y for the ground
  double half_u = 0.0;
  double half_v = 0.0;
  MaterialParams material;

  double signed_distance(Vec3 p) const { return dot(p - center, normal); }
  bool contains(Vec3 p, double tol = 1e-9) const;
  /// Signed margin to the nearest edge (positive inside).
  double interior_margin(Vec3 p) const;
};

enum class SceneId : std::uint8_t { los, circle, rounded_l, l };

SceneId parse_scene_id(std::string_view name);
std::string_view to_string(SceneId id);

struct Scene {
  SceneId scene_id = SceneId::los;
  std::vector<Reflector> reflectors;
  Vec3 bs_position{0.0, 0.0, 25.0};
  Vec3 array_axis{0.0, 1.0, 0.0};

  const Reflector& reflector(std::uint32_t id) const;
};

inline constexpr double kWallHeight = 50.0;
inline constexpr double kDefaultFacetDeg = 1.0;
inline constexpr double kCarrierHz = 28e9;

/// Builds one of the four evaluation scenes with materials evaluated at
/// carrier_hz. Throws std::invalid_argument for facet_deg outside (0, 10].
Scene build_scene(SceneId id, double facet_deg = kDefaultFacetDeg, double carrier_hz = kCarrierHz);

/// Chord facets approximating a vertical arc wall centred at `center`
/// (z of center ignored). Azimuths are in radians, counter-clockwise from +x.
/// Normals point toward the arc centre. Ids are assigned from first_id.
std::vector<Reflector> facetize_arc(Vec3 center, double radius, double az_begin, double az_end,
                                    double z_min, double z_max, double facet_deg,
                                    const MaterialParams& material, std::uint32_t first_id = 0);

/// Vertical wall between two ground points, normal facing `facing`.
Reflector make_wall(Vec3 a, Vec3 b, double z_min, double z_max, Vec3 facing,
                    const MaterialParams& material, std::uint32_t id);

struct SamplingRegion {
  double range_min_m = 5.0;
  double range_max_m = 200.0;
  double az_min_deg = -60.0;
  double az_max_deg = 60.0;
  double height_m = 25.0;
  bool uniform_in_area = false;
};

/// Deterministic in (seed, index): range and azimuth uniform over the region
/// (or uniform in area when requested), z fixed.
Vec3 sample_position(std::uint64_t seed, std::uint64_t index, const SamplingRegion& region = {});

}  // namespace marble
