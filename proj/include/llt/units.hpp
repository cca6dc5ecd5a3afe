#pragma once

#include <string>
#include <string_view>

// Unit-suffixed quantity strings ("55 L/s", "110 degC", "60 in") used by the
// configuration and scenario files. Values are converted to the internal unit
// of their dimension: SI everywhere, except the vacuum quantities, which stay
// in Torr / liters / cm^2 (vacuum-engineering convention).
namespace llt::units {

enum class Dim {
  dimensionless,
  length,         // m
  time,           // s
  velocity,       // m/s
  acceleration,   // m/s^2
  pressure,       // Torr
  volume,         // L
  pump_speed,     // L/s
  area,           // cm^2
  throughput,     // Torr L/s
  outgassing,     // Torr L/(s cm^2)
  celsius,        // degC (chamber temperatures)
  celsius_rate,   // degC/s
  kelvin,         // K (atom temperatures)
  energy,         // J; also accepts temperature-equivalent (uK) and h*f (MHz)
  power,          // W
  frequency,      // Hz
  current,        // A
  loss_constant,  // Torr s
  loading_rate,   // atoms/(s A)
};

std::string_view dim_name(Dim d);

// Parses "<number> <unit>". Plain numbers are accepted only for
// dimensionless quantities. Throws ConfigError on malformed input, unknown
// units, or a unit of the wrong dimension.
double parse(std::string_view text, Dim expected);

// Formats a value already in internal units with the internal unit suffix.
std::string format(double value, Dim d);

}  // namespace llt::units
