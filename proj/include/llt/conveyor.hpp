#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "llt/constants.hpp"

namespace llt::conveyor {

struct GaussianBeam {
  double power = 0.120;           // W
  double waist = 120e-6;          // m, 1/e^2 intensity radius at focus
  double wavelength = 785e-9;     // m
  double focus_position = 0.0508;  // m along the transport axis, from the MOT
};

inline constexpr double kMaxDetuningOffset = 2e6;  // Hz, AOM envelope

struct LatticeConfig {
  GaussianBeam beam_up{};
  GaussianBeam beam_down{};
  double detuning_offset = 0.0;                 // Hz, signed
  std::optional<double> lattice_depth_override;  // J
  double heating_rate = 0.0;                    // J/s per atom; phase-noise hook, off by default
};

// Default operating point: 120 mW per beam, 120 um waist, 785 nm, depth
// pinned to kB * 38 uK.
LatticeConfig default_lattice();

// Throws PreconditionError on non-physical beams, unequal wavelengths or an
// offset beyond the 2 MHz envelope.
void validate(const LatticeConfig& cfg);

struct DipoleDepth {
  double joules = 0.0;  // |U0|
  double microkelvin = 0.0;
  double hertz = 0.0;
  bool attractive = true;  // red-detuned net potential
};

// Two-line (D1 + D2) far-detuned dipole potential at the standing-wave
// antinode, the rotating-wave terms only. Throws ResonanceError within 0.1 nm
// of a D line.
DipoleDepth dipole_depth(const LatticeConfig& cfg, const phys::LineData& line = phys::rb87());

// Depth used for dynamics: the override when present, else dipole_depth.
double operating_depth(const LatticeConfig& cfg, const phys::LineData& line = phys::rb87());

double axial_frequency(double depth, double wavelength, double mass = phys::m_Rb87);
double lattice_velocity(double detuning_offset, double wavelength);
double critical_acceleration(double depth, double wavelength, double mass = phys::m_Rb87);

// Linear-velocity segment of a piecewise profile.
struct Segment {
  double t0, t1;
  double v0, v1;
  double z0;  // lattice displacement at t0
};

struct TransportPlan {
  double distance = 0.0;
  double v_max = 0.0;
  double a_max = 0.0;
  double duration = 0.0;
  std::vector<Segment> profile;

  double velocity_at(double t) const;
  double position_at(double t) const;
  double acceleration_at(double t) const;
  // Net displacement of the profile; equals `distance` to 1e-9 m for planned moves.
  double integrated_distance() const;
  bool triangular() const { return profile.size() == 2; }

  static TransportPlan stationary(double duration);
  static TransportPlan constant_velocity(double velocity, double duration);
};

// Time-optimal trapezoid (triangle when v_max is unreachable).
TransportPlan plan_transport(double distance, double v_max, double a_max);

struct TransportOptions {
  int steps_per_period = 20;    // dt = 1 / (steps_per_period * f_ax); >= 20 enforced
  bool beam_divergence = true;  // depth factor w0^2 / w(z)^2
  bool bound_only = false;      // initial sample restricted to atoms bound in the well
  int trace_points = 0;         // samples of (t, z_lat, survival so far)
  int energy_window = 0;        // steps averaged at start/end for the drift diagnostic
  double carry_tolerance = 1e-3;  // m; allowed slip relative to the starting well
  phys::LineData line = phys::rb87();
};

struct PhaseSpacePoint {
  double z;  // m, lab frame
  double v;  // m/s, lab frame
};

struct TracePoint {
  double t;
  double z_lattice;
  double survival;
};

struct TransportResult {
  double survival_fraction = 0.0;
  double mean_energy_gain = 0.0;  // J, survivors, energy above the local trough
  double depth = 0.0;             // J, at the focus
  double dt = 0.0;
  std::uint64_t steps = 0;
  double max_energy_drift = 0.0;  // J; windowed, when energy_window > 0
  std::vector<PhaseSpacePoint> final_sample;
  std::vector<TracePoint> trace;
};

// 1-D axial Monte Carlo, velocity-Verlet. Atoms draw from independent
// per-index RNG substreams, so the OpenMP kernel reproduces the serial
// reference bit for bit.
TransportResult simulate_transport_serial(const LatticeConfig& cfg, const TransportPlan& plan,
                                          double temperature, int n_atoms, std::uint64_t seed,
                                          const TransportOptions& opt = {});
TransportResult simulate_transport(const LatticeConfig& cfg, const TransportPlan& plan,
                                   double temperature, int n_atoms, std::uint64_t seed,
                                   const TransportOptions& opt = {});

}  // namespace llt::conveyor
