#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

// Two-chamber UHV network. Units here are Torr, L, L/s, cm^2, degC and
// seconds; nothing in this module is SI.
namespace llt::vac {

inline constexpr double kAtmosphere = 760.0;     // Torr
inline constexpr double kPressureFloor = 1e-12;  // Torr
inline constexpr int kAir = -1;                  // path endpoint: the lab

// An outgassing surface. Chamber walls are one; an installed cavity is a
// payload surface that travels with the translator.
struct Surface {
  std::string name;
  double area = 0.0;           // cm^2
  double contamination = 0.0;  // 0 = baked clean, 1 = fresh from air
};

struct Chamber {
  std::string name;
  double volume = 0.0;  // L
  Surface walls;
  std::vector<Surface> payloads;
  double pressure = kPressureFloor;  // Torr
  double temperature = 20.0;         // degC
  double temperature_target = 20.0;  // degC; heater setpoint or ambient
  double ramp_rate = 20.0 / 3600.0;  // degC/s, magnitude
  bool open_to_air = false;          // flanges off: pressure pinned at 760 Torr
};

struct OutgassingModel {
  double q_clean = 1.2e-12;               // Torr L/(s cm^2)
  double q_dirty = 1.2e-9;                // Torr L/(s cm^2)
  double bake_time_const_ref = 24 * 3600.0;  // s, at bake_ref_temp
  double bake_ref_temp = 110.0;           // degC
  double temp_doubling = 15.0;            // degC
  double ref_temp = 20.0;                 // degC
};

enum class PumpKind { ion, turbo };
enum class PumpState { off, starting, on, tripped };

std::string_view to_string(PumpState s);

struct Valve {
  std::string name;
  double conductance = 0.0;  // L/s fully open
  double fraction = 0.0;     // 0 closed, 1 open, partial in between
};

// Flow path between two chambers or a chamber and the lab. The path's own
// conductance (0 = unrestricted) adds in series with every listed valve.
struct Path {
  std::string name;
  int a = 0;
  int b = kAir;
  double conductance = 0.0;
  std::vector<int> valves;
  bool enabled = true;
};

struct Pump {
  std::string name;
  PumpKind kind = PumpKind::ion;
  int chamber = 0;
  double nominal_speed = 0.0;      // L/s at the pump flange
  double port_conductance = 0.0;   // L/s in series; 0 = none
  double derate_pressure = 0.0;    // Torr; speed / (1 + P / derate) when > 0
  double base_pressure = 0.0;      // Torr
  double max_start_pressure = std::numeric_limits<double>::infinity();
  double trip_pressure = std::numeric_limits<double>::infinity();
  double trip_delay = 5.0;         // s above trip_pressure before tripping
  std::vector<int> valves;         // the pump sees the chamber through these
  PumpState state = PumpState::off;
  double over_pressure_time = 0.0;  // s, continuous
};

struct VacuumNetwork {
  std::vector<Chamber> chambers;
  std::vector<Valve> valves;
  std::vector<Path> paths;
  std::vector<Pump> pumps;
  OutgassingModel outgassing;
  double time = 0.0;  // s
  double rtol = 1e-10;
  double atol = 1e-12;  // on ln P
  double max_step = 1.0;
  double monitor_interval = 1.0;  // trip logic sample period, s
  double dt_hint = 1e-3;          // integrator step carried between calls
};

// Factory for the calibrated apparatus: chamber 0 science, chamber 1
// loadlock; valves 0 gate, 1 angle; paths 0 gate, 1 vent; pumps 0 science
// ion, 1 loadlock ion, 2 turbo.
VacuumNetwork default_network();

namespace idx {
inline constexpr int science = 0, loadlock = 1;
inline constexpr int gate_valve = 0, angle_valve = 1;
inline constexpr int gate_path = 0, vent_path = 1;
inline constexpr int science_ion = 0, loadlock_ion = 1, turbo = 2;
}  // namespace idx

// Throws PreconditionError on dangling indices or non-physical parameters.
void validate(const VacuumNetwork& net);

double outgassing_load(const Surface& s, double temperature, const OutgassingModel& m);
double outgassing_load(const Chamber& ch, const OutgassingModel& m);

double bake_time_constant(double temperature, const OutgassingModel& m);

// Series conductance of a path or pump connection; 0 when any valve is shut.
double series_conductance(const VacuumNetwork& net, double own, std::span<const int> valves);
double path_conductance(const VacuumNetwork& net, const Path& p);
double effective_speed(const VacuumNetwork& net, const Pump& p, double pressure);

// Advances the network by dt. Pressures integrate in ln P with adaptive
// Dormand-Prince 5(4); surface contamination and temperature ramps are
// advanced in closed form. Internally splits at the trip-monitor period and
// at ramp end points. Throws IntegrationFailure naming the quantity that went
// non-finite.
void step(VacuumNetwork& net, double dt);

// Single-chamber closed form P* = (Q + sum S_i Pb_i) / sum S_i, pumps
// evaluated in their low-pressure limit. Throws NoEquilibrium when no pump on
// the chamber is running.
double equilibrium_pressure(double load, std::span<const double> speeds,
                            std::span<const double> base_pressures);
double equilibrium_pressure(const VacuumNetwork& net, int chamber);

// Coupled steady state of the whole network with loads frozen at their
// current values. Chambers open to air stay at 760 Torr.
std::vector<double> steady_state(const VacuumNetwork& net);

struct GaugeReading {
  double torr = 0.0;
  bool over_range = false;
};

inline constexpr double kGaugeMax = 1e-3;  // Torr
inline constexpr double kGaugeSigma = 0.03;

// Ion-gauge model: lognormal multiplicative noise, over-range above 1e-3 Torr.
GaugeReading gauge_read(const Chamber& ch, std::mt19937_64& rng, bool noise = true);

}  // namespace llt::vac
