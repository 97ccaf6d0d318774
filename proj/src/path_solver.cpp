// SPDX-License-Identifier: Apache-2.0

#include "marble/path_solver.hpp"

#include <stdexcept>

namespace marble {

Vec3 mirror_point(Vec3 p, const Reflector& r) {
  return p - (2.0 * r.signed_distance(p)) * r.normal;
}

cdouble fresnel_coefficient(const MaterialParams& material, double incidence_angle, double f_hz) {
  if (!(incidence_angle >= 0.0 && incidence_angle < kPi / 2))
    throw std::invalid_argument("incidence angle must lie in [0, pi/2)");
  const double f_ghz = f_hz * 1e-9;
  const cdouble eta(material.rel_permittivity, -17.98 * material.conductivity / f_ghz);
  const double c = std::cos(incidence_angle);
  const double s = std::sin(incidence_angle);
  const cdouble root = std::sqrt(eta - s * s);
  return (c - root) / (c + root);
}

cdouble path_gain(const std::vector<Vec3>& vertices, std::span<const std::uint32_t> chain,
                  const Scene& scene, double f0_hz) {
  if (vertices.size() < 2) throw std::invalid_argument("path needs at least two vertices");
  double length = 0.0;
  for (std::size_t i = 0; i + 1 < vertices.size(); ++i) length += distance(vertices[i], vertices[i + 1]);
  const double lambda0 = kSpeedOfLight / f0_hz;
  cdouble g(lambda0 / (4.0 * kPi * length), 0.0);
  for (std::size_t k = 0; k < chain.size() && chain[k] != kNoReflector; ++k) {
    const Reflector& r = scene.reflector(chain[k]);
    const Vec3 incoming = normalized(vertices[k + 1] - vertices[k]);
    const double cos_i = std::min(1.0, std::abs(dot(incoming, r.normal)));
    g *= fresnel_coefficient(r.material, std::acos(cos_i), f0_hz);
  }
  return g;
}

bool segment_hits(const Reflector& r, Vec3 a, Vec3 b, double tol) {
  const double da = r.signed_distance(a);
  const double db = r.signed_distance(b);
  if ((da > 0.0 && db > 0.0) || (da < 0.0 && db < 0.0)) return false;
  const double denom = da - db;
  if (denom == 0.0) return false;  // segment lies in the plane
  const double t = da / denom;
  const double seg_len = distance(a, b);
  if (t * seg_len <= tol || (1.0 - t) * seg_len <= tol) return false;
  return r.contains(a + t * (b - a), 0.0);
}

namespace {

struct Solver {
  const Scene& scene;
  const SolverOptions& opts;
  Vec3 target;
  Vec3 bs;

  // Intersection of segment from->to with the plane of r; nullopt when the
  // segment does not cross it strictly between its endpoints.
  bool crossing(const Reflector& r, Vec3 from, Vec3 to, Vec3& out) const {
    const double df = r.signed_distance(from);
    const double dt = r.signed_distance(to);
    if (!(df * dt < 0.0)) return false;
    const double t = df / (df - dt);
    out = from + t * (to - from);
    return true;
  }

  bool occluded(Vec3 a, Vec3 b, std::uint32_t skip0, std::uint32_t skip1) const {
    for (const Reflector& r : scene.reflectors) {
      if (r.kind == ReflectorKind::ground_plane) continue;
      if (r.id == skip0 || r.id == skip1) continue;
      if (segment_hits(r, a, b)) return true;
    }
    return false;
  }

  PropagationPath finish(PathKind kind, std::array<std::uint32_t, 2> chain,
                         std::vector<Vec3> vertices) const {
    PropagationPath p;
    p.kind = kind;
    p.chain = chain;
    double length = 0.0;
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i)
      length += distance(vertices[i], vertices[i + 1]);
    p.length = length;
    p.delay = length / kSpeedOfLight;
    const Vec3 arrival = vertices[vertices.size() - 2] - bs;
    p.azimuth = std::atan2(arrival.y, arrival.x);
    p.elevation = std::atan2(arrival.z, std::hypot(arrival.x, arrival.y));
    const int n = static_cast<int>(kind);
    p.gain = path_gain(vertices, std::span<const std::uint32_t>(chain.data(), n), scene, opts.f0_hz);
    p.vertices = std::move(vertices);
    return p;
  }

  void add_los(PathSet& out) const {
    if (occluded(target, bs, kNoReflector, kNoReflector)) return;
    out.paths.push_back(finish(PathKind::los, {kNoReflector, kNoReflector}, {target, bs}));
  }

  void add_bounce1(const Reflector& a, PathSet& out) const {
    // target and BS must sit on the same side of the reflecting plane
    if (!(a.signed_distance(target) * a.signed_distance(bs) > 0.0)) return;
    const Vec3 image = mirror_point(target, a);
    Vec3 p1;
    if (!crossing(a, image, bs, p1)) return;
    if (!a.contains(p1)) return;
    if (occluded(target, p1, a.id, kNoReflector)) return;
    if (occluded(p1, bs, a.id, kNoReflector)) return;
    out.paths.push_back(finish(PathKind::bounce1, {a.id, kNoReflector}, {target, p1, bs}));
  }

  void add_bounce2(const Reflector& a, const Reflector& b, PathSet& out) const {
    const double da_t = a.signed_distance(target);
    const double db_bs = b.signed_distance(bs);
    if (da_t == 0.0 || db_bs == 0.0) return;
    const Vec3 image1 = mirror_point(target, a);
    const Vec3 image2 = mirror_point(image1, b);
    Vec3 p2;
    if (!crossing(b, image2, bs, p2)) return;
    if (!b.contains(p2)) return;
    Vec3 p1;
    if (!crossing(a, image1, p2, p1)) return;
    if (!a.contains(p1)) return;
    // specular on the same side: target and p2 in front of a, p1 and BS in front of b
    if (!(da_t * a.signed_distance(p2) > 0.0)) return;
    if (!(b.signed_distance(p1) * db_bs > 0.0)) return;
    if (occluded(target, p1, a.id, kNoReflector)) return;
    if (occluded(p1, p2, a.id, b.id)) return;
    if (occluded(p2, bs, b.id, kNoReflector)) return;
    out.paths.push_back(finish(PathKind::bounce2, {a.id, b.id}, {target, p1, p2, bs}));
  }
};

}  // namespace

PathSet solve_paths(const Scene& scene, Vec3 target, const SolverOptions& opts) {
  if (opts.max_depth < 0 || opts.max_depth > 2)
    throw std::invalid_argument("max_depth must lie in [0, 2]");
  Solver s{scene, opts, target, scene.bs_position};
  PathSet out;
  out.target = target;
  s.add_los(out);
  if (opts.max_depth >= 1)
    for (const Reflector& a : scene.reflectors) s.add_bounce1(a, out);
  if (opts.max_depth >= 2)
    for (const Reflector& a : scene.reflectors)
      for (const Reflector& b : scene.reflectors)
        if (a.id != b.id) s.add_bounce2(a, b, out);
  return out;
}

}  // namespace marble
