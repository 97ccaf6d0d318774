// SPDX-License-Identifier: Apache-2.0
//
// Image-method specular path enumeration (LoS plus up to two bounces)
// with occlusion tests and perpendicular-polarization Fresnel gains.

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "marble/common.hpp"
#include "marble/scene.hpp"

namespace marble {

enum class PathKind : std::uint8_t { los = 0, bounce1 = 1, bounce2 = 2 };

inline constexpr std::uint32_t kNoReflector = std::numeric_limits<std::uint32_t>::max();

struct PropagationPath {
  PathKind kind = PathKind::los;
  std::array<std::uint32_t, 2> chain{kNoReflector, kNoReflector};
  std::vector<Vec3> vertices;  // target, reflection points..., BS
  double length = 0.0;         // m
  double delay = 0.0;          // s
  double azimuth = 0.0;        // rad, arrival direction at the BS
  double elevation = 0.0;      // rad
  cdouble gain;                // complex amplitude at the carrier

  int bounces() const { return static_cast<int>(kind); }
};

struct PathSet {
  Vec3 target;
  std::vector<PropagationPath> paths;
};

Vec3 mirror_point(Vec3 p, const Reflector& r);

/// Perpendicular (TE) reflection coefficient for incidence angle theta
/// (from the surface normal) with complex permittivity
/// eps' - j*17.98*sigma/f_GHz.
cdouble fresnel_coefficient(const MaterialParams& material, double incidence_angle, double f_hz);

/// Free-space amplitude lambda0/(4*pi*length) times the Fresnel product
/// over the bounces of `vertices` (target ... BS) on the reflectors in chain.
cdouble path_gain(const std::vector<Vec3>& vertices, std::span<const std::uint32_t> chain,
                  const Scene& scene, double f0_hz);

/// True when the open segment a->b crosses reflector r (excluding points
/// within `tol` of either endpoint).
bool segment_hits(const Reflector& r, Vec3 a, Vec3 b, double tol = 1e-9);

struct SolverOptions {
  int max_depth = 2;
  double f0_hz = kCarrierHz;
};

PathSet solve_paths(const Scene& scene, Vec3 target, const SolverOptions& opts = {});

}  // namespace marble
