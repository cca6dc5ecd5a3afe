#include "llt/units.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "llt/constants.hpp"
#include "llt/errors.hpp"

namespace llt::units {
namespace {

struct UnitDef {
  std::string_view symbol;
  Dim dim;
  double scale;   // internal = scale * value + offset
  double offset = 0.0;
};

constexpr double kHour = 3600.0;

const std::array kUnits{
    UnitDef{"m", Dim::length, 1.0},
    UnitDef{"cm", Dim::length, 1e-2},
    UnitDef{"mm", Dim::length, 1e-3},
    UnitDef{"um", Dim::length, 1e-6},
    UnitDef{"nm", Dim::length, 1e-9},
    UnitDef{"in", Dim::length, phys::inch},
    UnitDef{"s", Dim::time, 1.0},
    UnitDef{"ms", Dim::time, 1e-3},
    UnitDef{"us", Dim::time, 1e-6},
    UnitDef{"min", Dim::time, 60.0},
    UnitDef{"h", Dim::time, kHour},
    UnitDef{"d", Dim::time, 24 * kHour},
    UnitDef{"m/s", Dim::velocity, 1.0},
    UnitDef{"cm/s", Dim::velocity, 1e-2},
    UnitDef{"mm/s", Dim::velocity, 1e-3},
    UnitDef{"m/s2", Dim::acceleration, 1.0},
    UnitDef{"Torr", Dim::pressure, 1.0},
    UnitDef{"mbar", Dim::pressure, 100.0 * phys::torr_per_pascal},
    UnitDef{"Pa", Dim::pressure, phys::torr_per_pascal},
    UnitDef{"L", Dim::volume, 1.0},
    UnitDef{"m3", Dim::volume, 1000.0},
    UnitDef{"L/s", Dim::pump_speed, 1.0},
    UnitDef{"m3/h", Dim::pump_speed, 1000.0 / kHour},
    UnitDef{"cm2", Dim::area, 1.0},
    UnitDef{"m2", Dim::area, 1e4},
    UnitDef{"Torr*L/s", Dim::throughput, 1.0},
    UnitDef{"Torr*L/(s*cm2)", Dim::outgassing, 1.0},
    UnitDef{"degC", Dim::celsius, 1.0},
    UnitDef{"K", Dim::celsius, 1.0, -273.15},
    UnitDef{"degC/s", Dim::celsius_rate, 1.0},
    UnitDef{"degC/h", Dim::celsius_rate, 1.0 / kHour},
    UnitDef{"K", Dim::kelvin, 1.0},
    UnitDef{"mK", Dim::kelvin, 1e-3},
    UnitDef{"uK", Dim::kelvin, 1e-6},
    UnitDef{"nK", Dim::kelvin, 1e-9},
    UnitDef{"J", Dim::energy, 1.0},
    UnitDef{"K", Dim::energy, phys::kB},
    UnitDef{"mK", Dim::energy, 1e-3 * phys::kB},
    UnitDef{"uK", Dim::energy, 1e-6 * phys::kB},
    UnitDef{"Hz", Dim::energy, phys::h},
    UnitDef{"kHz", Dim::energy, 1e3 * phys::h},
    UnitDef{"MHz", Dim::energy, 1e6 * phys::h},
    UnitDef{"W", Dim::power, 1.0},
    UnitDef{"mW", Dim::power, 1e-3},
    UnitDef{"Hz", Dim::frequency, 1.0},
    UnitDef{"kHz", Dim::frequency, 1e3},
    UnitDef{"MHz", Dim::frequency, 1e6},
    UnitDef{"A", Dim::current, 1.0},
    UnitDef{"mA", Dim::current, 1e-3},
    UnitDef{"Torr*s", Dim::loss_constant, 1.0},
    UnitDef{"atoms/(s*A)", Dim::loading_rate, 1.0},
    UnitDef{"1/(s*A)", Dim::loading_rate, 1.0},
};

std::string normalize_unit(std::string_view u) {
  std::string out;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const unsigned char ch = static_cast<unsigned char>(u[i]);
    if (ch == ' ') {
      // "Torr L/s" -> "Torr*L/s"; spaces next to operators are dropped.
      if (!out.empty() && out.back() != '*' && out.back() != '/' && out.back() != '(' &&
          i + 1 < u.size() && u[i + 1] != ' ' && u[i + 1] != '*' && u[i + 1] != '/' &&
          u[i + 1] != ')')
        out.push_back('*');
      continue;
    }
    // UTF-8 middle dot and micro sign
    if (ch == 0xC2 && i + 1 < u.size()) {
      const unsigned char next = static_cast<unsigned char>(u[i + 1]);
      if (next == 0xB7) {
        out.push_back('*');
        ++i;
        continue;
      }
      if (next == 0xB5) {
        out.push_back('u');
        ++i;
        continue;
      }
    }
    if (ch == '^') continue;  // "cm^2" == "cm2"
    out.push_back(static_cast<char>(ch));
  }
  return out;
}

}  // namespace

std::string_view dim_name(Dim d) {
  switch (d) {
    case Dim::dimensionless: return "dimensionless";
    case Dim::length: return "m";
    case Dim::time: return "s";
    case Dim::velocity: return "m/s";
    case Dim::acceleration: return "m/s2";
    case Dim::pressure: return "Torr";
    case Dim::volume: return "L";
    case Dim::pump_speed: return "L/s";
    case Dim::area: return "cm2";
    case Dim::throughput: return "Torr*L/s";
    case Dim::outgassing: return "Torr*L/(s*cm2)";
    case Dim::celsius: return "degC";
    case Dim::celsius_rate: return "degC/s";
    case Dim::kelvin: return "K";
    case Dim::energy: return "J";
    case Dim::power: return "W";
    case Dim::frequency: return "Hz";
    case Dim::current: return "A";
    case Dim::loss_constant: return "Torr*s";
    case Dim::loading_rate: return "atoms/(s*A)";
  }
  return "?";
}

double parse(std::string_view text, Dim expected) {
  const std::string s(text);
  const char* begin = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE || !std::isfinite(value))
    throw ConfigError("malformed quantity '" + s + "'");
  const std::string unit = normalize_unit(std::string_view(end));
  if (unit.empty()) {
    if (expected == Dim::dimensionless) return value;
    throw ConfigError("quantity '" + s + "' needs a unit of dimension " +
                      std::string(dim_name(expected)));
  }
  bool known = false;
  for (const auto& def : kUnits) {
    if (def.symbol != unit) continue;
    known = true;
    if (def.dim == expected) return def.scale * value + def.offset;
  }
  if (known)
    throw ConfigError("unit '" + unit + "' in '" + s + "' does not convert to " +
                      std::string(dim_name(expected)));
  throw ConfigError("unknown unit '" + unit + "' in '" + s + "'");
}

std::string format(double value, Dim d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  if (d == Dim::dimensionless) return buf;
  return std::string(buf) + " " + std::string(dim_name(d));
}

}  // namespace llt::units
