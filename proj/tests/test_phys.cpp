#include <doctest.h>

#include <random>
#include <vector>

#include "llt/constants.hpp"
#include "llt/errors.hpp"
#include "llt/geometry.hpp"
#include "llt/units.hpp"

using namespace llt;
using phys::Rectangle;

namespace {

Vec3 random_point(std::mt19937_64& rng, double span) {
  std::uniform_real_distribution<double> u(-span, span);
  return {u(rng), u(rng), u(rng)};
}

Rectangle random_rect(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  const Vec3 a{u(rng), u(rng), u(rng)};
  Vec3 b{u(rng), u(rng), u(rng)};
  b = b - a * (dot(a, b) / dot(a, a));  // orthogonal half extents
  return {random_point(rng, 0.05), a, b};
}

}  // namespace

TEST_CASE("constants sit at their reference values") {
  CHECK(phys::m_Rb87 >= 1.443e-25);
  CHECK(phys::m_Rb87 <= 1.4435e-25);
  CHECK(phys::kB == 1.380649e-23);
  CHECK(phys::h == 6.62607015e-34);
  CHECK(phys::c == 299792458.0);
  CHECK(phys::torr_per_pascal * 101325.0 == doctest::Approx(760.0).epsilon(1e-12));
}

TEST_CASE("default geometry layout") {
  const phys::ApparatusGeometry g;
  CHECK_NOTHROW(phys::validate(g));
  CHECK(g.chamber_center.z - g.mot_position.z == doctest::Approx(2 * phys::inch).epsilon(1e-15));
  CHECK(g.cavity_envelope.center.z - g.mot_position.z == doctest::Approx(g.transport_distance));
  CHECK(g.transport_distance == doctest::Approx(4 * phys::inch));
  CHECK(g.translator_throw == doctest::Approx(60 * phys::inch));
  CHECK(g.feedthrough_pin_count == 40);

  auto bad = g;
  bad.feedthrough_pin_count = 39;
  CHECK_THROWS_AS(phys::validate(bad), InvalidGeometry);
  bad = g;
  bad.mot_position.z = -0.04;
  CHECK_THROWS_AS(phys::validate(bad), InvalidGeometry);
}

TEST_CASE("dispensers see the MOT but not the cavity") {
  const phys::ApparatusGeometry g;
  const std::vector<Rectangle> plate{g.carrier_plate};
  for (const auto& d : g.dispenser_positions) {
    CHECK(phys::line_of_sight(d, g.mot_position, plate));
    CHECK_FALSE(phys::line_of_sight(d, g.cavity_envelope.center, plate));
  }
}

TEST_CASE("nothing occludes with an empty list") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i)
    CHECK(phys::line_of_sight(random_point(rng, 1), random_point(rng, 1), {}));
}

TEST_CASE("degenerate inputs are rejected") {
  const Rectangle flat{{0, 0, 0}, {0.01, 0, 0}, {0, 0, 0}};
  const std::vector<Rectangle> occ{flat};
  CHECK_THROWS_AS(phys::line_of_sight({0, 0, -1}, {0, 0, 1}, occ), InvalidGeometry);
  CHECK_THROWS_AS(phys::line_of_sight({0, 0, 1}, {0, 0, 1}, {}), InvalidGeometry);
}

TEST_CASE("segment touching the plate edge within tolerance counts as blocked") {
  const Rectangle r{{0, 0, 0}, {0.01, 0, 0}, {0, 0.01, 0}};
  const std::vector<Rectangle> occ{r};
  CHECK_FALSE(phys::line_of_sight({0.01, 0, -1}, {0.01, 0, 1}, occ));
  CHECK(phys::line_of_sight({0.0101, 0, -1}, {0.0101, 0, 1}, occ));
  CHECK(phys::line_of_sight({0, 0, 0.5}, {0, 0, 1}, occ));  // ends before the plane
}

TEST_CASE("property: line of sight is symmetric and monotone in occluders") {
  std::mt19937_64 rng(20240611);
  int blocked = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    const Vec3 a = random_point(rng, 0.1), b = random_point(rng, 0.1);
    std::vector<Rectangle> occ;
    const int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) occ.push_back(random_rect(rng));
    const bool ab = phys::line_of_sight(a, b, occ);
    REQUIRE(ab == phys::line_of_sight(b, a, occ));
    auto more = occ;
    more.push_back(random_rect(rng));
    const bool after = phys::line_of_sight(a, b, more);
    REQUIRE((ab || !after));
    blocked += !after;
  }
  CHECK(blocked > 1000);  // the sample exercises both outcomes
}

TEST_CASE("unit parsing") {
  using units::Dim;
  using units::parse;
  CHECK(parse("60 in", Dim::length) == 60 * 0.0254);
  CHECK(parse("4in", Dim::length) == 0.1016);
  CHECK(parse("110 degC", Dim::celsius) == 110.0);
  CHECK(parse("383.15 K", Dim::celsius) == doctest::Approx(110.0));
  CHECK(parse("55 L/s", Dim::pump_speed) == 55.0);
  CHECK(parse("1 h", Dim::time) == 3600.0);
  CHECK(parse("38 uK", Dim::energy) == doctest::Approx(38e-6 * phys::kB));
  CHECK(parse("1 mbar", Dim::pressure) == doctest::Approx(0.750062).epsilon(1e-6));
  CHECK(parse("2.5", Dim::dimensionless) == 2.5);
  CHECK_THROWS_AS(parse("3", Dim::current), ConfigError);
  CHECK_THROWS_AS(parse("3 Torr", Dim::current), ConfigError);
  CHECK_THROWS_AS(parse("3 furlong", Dim::length), ConfigError);
  CHECK_THROWS_AS(parse("fast", Dim::velocity), ConfigError);
}

TEST_CASE("property: inch lengths round-trip exactly through the config text") {
  for (int n = 0; n <= 120; ++n) {
    const double m = n * phys::inch;
    CHECK(units::parse(std::to_string(n) + " in", units::Dim::length) == m);
  }
}
