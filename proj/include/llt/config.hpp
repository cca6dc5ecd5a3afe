#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llt/apparatus.hpp"
#include "llt/coils.hpp"
#include "llt/conveyor.hpp"
#include "llt/geometry.hpp"
#include "llt/tof.hpp"
#include "llt/vacuum.hpp"

namespace llt::engine {

struct TransportSettings {
  double distance = 0.1016;   // m
  double v_max = 0.785;       // m/s
  double a_max = 1500.0;      // m/s^2
  double temperature = 6e-6;  // K
  int atoms = 1000;
};

struct TofSettings {
  tof::ThermalCloud cloud{};
  tof::RenderOptions render{};
  std::vector<double> times = tof::default_times();
};

struct Seeds {
  std::uint64_t gauge = 7;
  std::uint64_t transport = 42;
  std::uint64_t tof = 11;
};

// Everything a simulation instance is built from. Loaded from one JSON
// document whose physical values are unit-suffixed strings.
struct ApparatusConfig {
  phys::ApparatusGeometry geometry;
  mag::CoilPair coils;
  conveyor::LatticeConfig lattice = conveyor::default_lattice();
  TransportSettings transport;
  vac::VacuumNetwork vacuum = vac::default_network();
  bool settle_initial_pressures = true;  // start from the network steady state
  app::ApparatusParams apparatus;
  TofSettings tof;
  double telemetry_cadence = 10.0;  // s of sim time
  double stream_rate = 10.0;        // Hz of wall time
  double service_speedup = 1.0;
  Seeds seeds;
};

ApparatusConfig default_config();

// Unknown keys, wrong types, malformed quantities and invariant violations
// all raise ConfigError with the JSON path of the offending entry.
ApparatusConfig load_config(const nlohmann::json& doc);
ApparatusConfig load_config_file(const std::string& path);

// JSON representation that load_config accepts and that round-trips.
nlohmann::json to_json(const ApparatusConfig& cfg);

}  // namespace llt::engine
