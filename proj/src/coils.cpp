#include "llt/coils.hpp"

#include <cmath>
#include <string>

#include "llt/constants.hpp"
#include "llt/errors.hpp"

namespace llt::mag {

using phys::mu0;
using phys::pi;

void validate(const CoilPair& c) {
  if (!(c.current >= 0.0)) throw PreconditionError("coil current must be >= 0");
  if (!(c.mean_radius > 0.0) || !(c.half_separation > 0.0))
    throw PreconditionError("coil radius and half separation must be positive");
  if (c.layers < 1 || c.turns_per_layer < 1) throw PreconditionError("coil needs at least one turn");
  const double inner = c.mean_radius - 0.5 * (c.layers - 1) * c.layer_radial_pitch;
  if (c.winding == Winding::distributed && inner <= 0.0)
    throw PreconditionError("innermost winding layer has non-positive radius");
}

std::vector<Loop> loops(const CoilPair& c) {
  std::vector<Loop> out;
  out.reserve(2 * static_cast<std::size_t>(c.turns_per_coil()));
  const double lower_current = c.anti_helmholtz ? -c.current : c.current;
  for (int side = 0; side < 2; ++side) {
    const double sign_z = side == 0 ? 1.0 : -1.0;
    const double current = side == 0 ? c.current : lower_current;
    for (int l = 0; l < c.layers; ++l) {
      for (int t = 0; t < c.turns_per_layer; ++t) {
        double r = c.mean_radius;
        double z = c.half_separation;
        if (c.winding == Winding::distributed) {
          r += (l - 0.5 * (c.layers - 1)) * c.layer_radial_pitch;
          z += (t - 0.5 * (c.turns_per_layer - 1)) * c.turn_axial_pitch;
        }
        out.push_back({r, c.center.z + sign_z * z, current});
      }
    }
  }
  return out;
}

double on_axis_loop_field(double radius, double current, double z) {
  const double s = radius * radius + z * z;
  return mu0 * current * radius * radius / (2.0 * s * std::sqrt(s));
}

double center_gradient_analytic(const CoilPair& c) {
  const double r2 = c.mean_radius * c.mean_radius;
  const double s = r2 + c.half_separation * c.half_separation;
  return 3.0 * mu0 * c.turns_per_coil() * c.current * r2 * c.half_separation /
         (s * s * std::sqrt(s));
}

Vec3 loop_field_elliptic(const Loop& loop, const Vec3& p) {
  const double a = loop.radius;
  const double z = p.z - loop.z;
  const double rho2 = p.x * p.x + p.y * p.y;
  const double rho = std::sqrt(rho2);
  const double a2 = a * a;

  if (rho < 1e-4 * a) {
    // Near-axis expansion to second order in rho; avoids the 0/0 in B_rho.
    const double s = a2 + z * z;
    const double sq = std::sqrt(s);
    const double b0 = mu0 * loop.current * a2 / (2.0 * s * sq);
    const double b0pp = 1.5 * mu0 * loop.current * a2 * (4.0 * z * z - a2) / (s * s * s * sq);
    const double brho_over_rho = 3.0 * mu0 * loop.current * a2 * z / (4.0 * s * s * sq);
    return {brho_over_rho * p.x, brho_over_rho * p.y, b0 - 0.25 * rho2 * b0pp};
  }

  const double r2 = rho2 + z * z;
  const double alpha2 = a2 + r2 - 2.0 * a * rho;
  const double beta2 = a2 + r2 + 2.0 * a * rho;
  const double beta = std::sqrt(beta2);
  const double k = std::sqrt(1.0 - alpha2 / beta2);
  const double ek = std::comp_ellint_2(k);
  const double kk = std::comp_ellint_1(k);
  const double cst = mu0 * loop.current / pi;

  const double brho = cst * z / (2.0 * alpha2 * beta * rho) * ((a2 + r2) * ek - alpha2 * kk);
  const double bz = cst / (2.0 * alpha2 * beta) * ((a2 - r2) * ek + alpha2 * kk);
  return {brho * p.x / rho, brho * p.y / rho, bz};
}

Vec3 loop_field_quadrature(const Loop& loop, const Vec3& p, int segments) {
  // Trapezoid rule on the periodic Biot-Savart integrand; spectrally accurate
  // away from the wire.
  const double dphi = 2.0 * pi / segments;
  Vec3 sum{};
  for (int i = 0; i < segments; ++i) {
    const double phi = i * dphi;
    const double cphi = std::cos(phi);
    const double sphi = std::sin(phi);
    const Vec3 src{loop.radius * cphi, loop.radius * sphi, loop.z};
    const Vec3 dl{-loop.radius * sphi, loop.radius * cphi, 0.0};
    const Vec3 r = p - src;
    const double d = norm(r);
    sum += cross(dl, r) * (1.0 / (d * d * d));
  }
  return sum * (mu0 * loop.current * dphi / (4.0 * pi));
}

namespace {

void check_not_on_filament(const std::vector<Loop>& ls, const Vec3& p) {
  const double rho = std::hypot(p.x, p.y);
  for (const auto& l : ls) {
    const double d = std::hypot(rho - l.radius, p.z - l.z);
    if (d <= kWireRadius)
      throw SingularPoint("field point lies within the wire radius of a filament (distance " +
                          std::to_string(d) + " m)");
  }
}

Vec3 sum_loops(const std::vector<Loop>& ls, const Vec3& local, const FieldOptions& opt) {
  Vec3 b{};
  if (opt.method == FieldMethod::elliptic) {
    for (const auto& l : ls) b += loop_field_elliptic(l, local);
  } else {
    for (const auto& l : ls) b += loop_field_quadrature(l, local, opt.segments);
  }
  return b;
}

Vec3 field_from_loops(const std::vector<Loop>& ls, const CoilPair& c, const Vec3& point,
                      const FieldOptions& opt) {
  const Vec3 local{point.x - c.center.x, point.y - c.center.y, point.z};
  check_not_on_filament(ls, local);
  return sum_loops(ls, local, opt);
}

void check_options(const FieldOptions& opt) {
  if (opt.method == FieldMethod::quadrature && opt.segments < 256)
    throw PreconditionError("quadrature needs at least 256 segments");
}

}  // namespace

Vec3 field_at(const CoilPair& coils, const Vec3& point, const FieldOptions& opt) {
  validate(coils);
  check_options(opt);
  return field_from_loops(loops(coils), coils, point, opt);
}

Mat3 gradient_at(const CoilPair& coils, const Vec3& point, const FieldOptions& opt) {
  validate(coils);
  check_options(opt);
  const auto ls = loops(coils);
  field_from_loops(ls, coils, point, opt);  // singular-point check at the centre

  const double h = kGradientStep;
  Mat3 jac;
  for (int j = 0; j < 3; ++j) {
    Vec3 e{};
    (j == 0 ? e.x : j == 1 ? e.y : e.z) = h;
    const Vec3 fp1 = field_from_loops(ls, coils, point + e, opt);
    const Vec3 fm1 = field_from_loops(ls, coils, point - e, opt);
    const Vec3 fp2 = field_from_loops(ls, coils, point + 2.0 * e, opt);
    const Vec3 fm2 = field_from_loops(ls, coils, point - 2.0 * e, opt);
    const Vec3 d = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h);
    jac(0, j) = d.x;
    jac(1, j) = d.y;
    jac(2, j) = d.z;
  }
  return jac;
}

std::vector<Vec3> field_grid_serial(const CoilPair& coils, std::span<const Vec3> points,
                                    const FieldOptions& opt) {
  validate(coils);
  check_options(opt);
  const auto ls = loops(coils);
  std::vector<Vec3> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = field_from_loops(ls, coils, points[i], opt);
  return out;
}

std::vector<Vec3> field_grid(const CoilPair& coils, std::span<const Vec3> points,
                             const FieldOptions& opt) {
  validate(coils);
  check_options(opt);
  const auto ls = loops(coils);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(points.size());
  std::vector<Vec3> out(points.size());
  for (const auto& p : points) check_not_on_filament(ls, {p.x - coils.center.x, p.y - coils.center.y, p.z});

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        sum_loops(ls, {p.x - coils.center.x, p.y - coils.center.y, p.z}, opt);
  }
  return out;
}

std::vector<Vec3> cube_grid(const Vec3& center, double half_span, int n) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(n) * n * n);
  const double step = n > 1 ? 2.0 * half_span / (n - 1) : 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        pts.push_back({center.x - half_span + i * step, center.y - half_span + j * step,
                       center.z - half_span + k * step});
  return pts;
}

}  // namespace llt::mag
