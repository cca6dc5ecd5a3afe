#pragma once

#include <span>
#include <vector>

#include "llt/vec3.hpp"

namespace llt::mag {

enum class Winding { distributed, collapsed };
enum class FieldMethod { elliptic, quadrature };

// Anti-Helmholtz (or Helmholtz) coil pair coaxial with z. The "upper" coil
// sits at center.z + half_separation and carries +current (counter-clockwise
// seen from +z); in anti-Helmholtz mode the lower coil carries -current.
struct CoilPair {
  double mean_radius = 0.024;      // m, calibrated to 20 G/cm at 3 A
  double half_separation = 0.0127;  // m
  int layers = 4;
  int turns_per_layer = 9;
  double layer_radial_pitch = 1.2e-3;  // m
  double turn_axial_pitch = 1.2e-3;    // m
  double current = 3.0;                // A
  bool anti_helmholtz = true;
  Winding winding = Winding::distributed;
  Vec3 center{};

  int turns_per_coil() const { return layers * turns_per_layer; }
};

// Throws PreconditionError on negative current or non-positive geometry.
void validate(const CoilPair& coils);

// One filamentary circular loop, coaxial with z.
struct Loop {
  double radius;
  double z;
  double current;
};

std::vector<Loop> loops(const CoilPair& coils);

inline constexpr double kWireRadius = 5e-4;         // m
inline constexpr int kDefaultQuadratureSegments = 512;

// Field of a single loop centred on the z axis at height loop.z, evaluated
// at `p` (coordinates relative to the coil axis origin).
Vec3 loop_field_elliptic(const Loop& loop, const Vec3& p);
Vec3 loop_field_quadrature(const Loop& loop, const Vec3& p, int segments);

struct FieldOptions {
  FieldMethod method = FieldMethod::elliptic;
  int segments = kDefaultQuadratureSegments;  // quadrature only, >= 256
};

// Total field in tesla. Throws SingularPoint within kWireRadius of a filament.
Vec3 field_at(const CoilPair& coils, const Vec3& point, const FieldOptions& opt = {});

// Jacobian dB_i/dx_j in T/m (row i = field component, column j = direction),
// by fourth-order central differences with step 1e-5 m.
Mat3 gradient_at(const CoilPair& coils, const Vec3& point, const FieldOptions& opt = {});

inline constexpr double kGradientStep = 1e-5;  // m

// Closed-form on-axis expressions used as oracles.
double on_axis_loop_field(double radius, double current, double z);
double center_gradient_analytic(const CoilPair& coils);  // collapsed winding

// Batch evaluation over a list of points. The serial version is the reference
// for the OpenMP kernel; both return identical values point by point.
std::vector<Vec3> field_grid_serial(const CoilPair& coils, std::span<const Vec3> points,
                                    const FieldOptions& opt = {});
std::vector<Vec3> field_grid(const CoilPair& coils, std::span<const Vec3> points,
                             const FieldOptions& opt = {});

// Regular lattice of n^3 points spanning [-half_span, half_span] on each axis
// around `center`.
std::vector<Vec3> cube_grid(const Vec3& center, double half_span, int n);

}  // namespace llt::mag
