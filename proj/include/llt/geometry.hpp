#pragma once

#include <span>
#include <vector>

#include "llt/vec3.hpp"

namespace llt::phys {

// Planar rectangle: center plus two orthogonal half-extent vectors.
struct Rectangle {
  Vec3 center;
  Vec3 half_u;
  Vec3 half_v;

  Vec3 normal() const;  // unit normal, half_u x half_v
  double area() const;
};

// Axis-aligned box given by its center and full edge lengths.
struct Box {
  Vec3 center;
  Vec3 size;
};

struct ApparatusGeometry {
  Vec3 chamber_center{0.0, 0.0, 0.0};
  Vec3 mot_position{0.0, 0.0, -0.0508};
  double transport_distance = 0.1016;
  double translator_throw = 1.524;
  Box cavity_envelope{{0.0, 0.0, 0.0508}, {0.1016, 0.1016, 0.0762}};
  Rectangle carrier_plate{{0.0, 0.0, 0.0127}, {0.0635, 0.0, 0.0}, {0.0, 0.0635, 0.0}};
  std::vector<Vec3> dispenser_positions{{0.025, 0.02, 0.0064},
                                        {-0.025, 0.02, 0.0064},
                                        {0.025, -0.02, 0.0064},
                                        {-0.025, -0.02, 0.0064}};
  int feedthrough_pin_count = 40;
};

// Throws InvalidGeometry when an invariant of the layout is broken.
void validate(const ApparatusGeometry& g);

inline constexpr double kLineOfSightTolerance = 1e-9;  // m

// True iff the open segment (source, target) meets none of the occluders.
// Throws InvalidGeometry for a zero-area occluder or source == target.
bool line_of_sight(const Vec3& source, const Vec3& target, std::span<const Rectangle> occluders);

}  // namespace llt::phys
