// SPDX-License-Identifier: Apache-2.0
//
// Brute-force specular path oracle, independent of the image method.
// For each reflector chain it minimizes the total target->...->BS length
// over the in-plane coordinates of the bounce points (the length is convex
// in those coordinates), then probes a 0.05 m grid around the minimizer.
// A minimizer that is stationary, reflects on the correct side of every
// plane and is unoccluded is a specular path.

#pragma once

#include <cstdint>
#include <vector>

#include "marble/scene.hpp"

namespace oracle {

using marble::Vec3;

struct OraclePath {
  std::vector<std::uint32_t> chain;
  std::vector<Vec3> points;      // target, bounce points, BS
  double length = 0.0;
  double bounds_margin = 0.0;    // min interior margin over bounce points (negative = outside)
  double occlusion_margin = 0.0; // distance of the closest occluder crossing from its edges;
                                 // -inf when not a stationary in-facet reflective point (scan skipped)
  bool converged = false;        // stationary point found
  bool reflective = false;       // correct side of every plane
  bool occluded = false;
};

/// Minimizer for one chain (length 0, 1 or 2).
OraclePath solve_chain(const marble::Scene& scene, Vec3 target, const std::vector<std::uint32_t>& chain);

/// All chains up to max_depth (consecutive duplicates excluded).
std::vector<OraclePath> enumerate(const marble::Scene& scene, Vec3 target, int max_depth);

/// True when the path is a specular path robustly inside every facet and
/// clear of every occluder edge by at least `margin` metres.
bool robust_path(const OraclePath& p, double margin);

/// Angle (rad) between the mirrored incoming direction and the outgoing one
/// at each bounce; 0 for an exact specular reflection.
double specular_residual(const std::vector<Vec3>& points, const std::vector<Vec3>& normals);

}  // namespace oracle
