#include "llt/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "llt/errors.hpp"

namespace llt::phys {

Vec3 Rectangle::normal() const {
  const Vec3 n = cross(half_u, half_v);
  return n / norm(n);
}

double Rectangle::area() const { return 4.0 * norm(cross(half_u, half_v)); }

void validate(const ApparatusGeometry& g) {
  const double below = g.chamber_center.z - g.mot_position.z;
  if (std::fabs(below - 0.0508) > 1e-9)
    throw InvalidGeometry("MOT must sit 0.0508 m below the chamber center");
  const double rise = g.cavity_envelope.center.z - g.mot_position.z;
  if (std::fabs(rise - g.transport_distance) > 1e-9)
    throw InvalidGeometry("transport distance must equal MOT-to-cavity-center height");
  if (g.feedthrough_pin_count != 40) throw InvalidGeometry("feedthrough pin count must be 40");
  if (g.translator_throw <= 0.0) throw InvalidGeometry("translator throw must be positive");
  if (g.carrier_plate.area() <= 0.0) throw InvalidGeometry("carrier plate has zero area");
}

namespace {

// Does the 2-D segment p0->p1 (plate-local coordinates) touch the rectangle
// [-hu, hu] x [-hv, hv]? Liang-Barsky clipping restricted to the open range.
bool segment_hits_rect_2d(double x0, double y0, double x1, double y1, double hu, double hv,
                          double t_lo, double t_hi) {
  const double dx = x1 - x0;
  const double dy = y1 - y0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {x0 + hu, hu - x0, y0 + hv, hv - y0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0)
      t_lo = std::max(t_lo, r);
    else
      t_hi = std::min(t_hi, r);
  }
  return t_lo < t_hi;
}

bool blocks(const Rectangle& rect, const Vec3& s, const Vec3& t) {
  const double tol = kLineOfSightTolerance;
  const double len_u = norm(rect.half_u);
  const double len_v = norm(rect.half_v);
  const Vec3 eu = rect.half_u / len_u;
  const Vec3 ev = rect.half_v / len_v;
  const Vec3 n = rect.normal();
  const Vec3 d = t - s;
  const double length = norm(d);
  const double ds = dot(s - rect.center, n);
  const double dt = dot(t - rect.center, n);
  // Open segment: parameters within tol (in meters) of an endpoint are excluded.
  const double t_lo = tol / length;
  const double t_hi = 1.0 - tol / length;

  if (std::fabs(ds) <= tol && std::fabs(dt) <= tol) {
    const Vec3 a = s - rect.center;
    const Vec3 b = t - rect.center;
    return segment_hits_rect_2d(dot(a, eu), dot(a, ev), dot(b, eu), dot(b, ev), len_u + tol,
                                len_v + tol, t_lo, t_hi);
  }
  if ((ds > tol && dt > tol) || (ds < -tol && dt < -tol)) return false;
  const double denom = ds - dt;
  if (std::fabs(denom) < 1e-300) return false;
  const double param = ds / denom;
  if (param <= t_lo || param >= t_hi) return false;
  const Vec3 hit = s + d * param - rect.center;
  return std::fabs(dot(hit, eu)) <= len_u + tol && std::fabs(dot(hit, ev)) <= len_v + tol;
}

}  // namespace

bool line_of_sight(const Vec3& source, const Vec3& target, std::span<const Rectangle> occluders) {
  if (norm(target - source) <= kLineOfSightTolerance)
    throw InvalidGeometry("line_of_sight: source and target coincide");
  for (const auto& rect : occluders)
    if (rect.area() <= 1e-18) throw InvalidGeometry("line_of_sight: zero-area occluder");
  for (const auto& rect : occluders)
    if (blocks(rect, source, target)) return false;
  return true;
}

}  // namespace llt::phys
