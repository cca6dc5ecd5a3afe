#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "llt/apparatus.hpp"
#include "llt/config.hpp"

namespace llt::engine {

using nlohmann::json;
using nlohmann::ordered_json;

// --- commands ---------------------------------------------------------------

// {"verb": "set_bake", "params": {"setpoint": "110 degC"}, "force": false}.
// Throws CommandError with kind malformed, unknown_verb, unknown_parameter or
// parameter_out_of_range.
app::DeviceCommand parse_command(const json& j);
json command_to_json(const app::DeviceCommand& cmd);

// --- telemetry --------------------------------------------------------------

struct Contamination {
  double science_walls = 0.0;
  double loadlock_walls = 0.0;
  std::optional<double> science_cavity;
  std::optional<double> loadlock_cavity;
};

struct DeviceSummary {
  std::string gate_valve;
  std::string angle_valve;
  bool flanges_open = false;
  double translator = 0.0;  // m
  std::string turbo;
  std::string ion_science;
  std::string ion_loadlock;
  bool bake_on = false;
  double bake_setpoint = 20.0;  // degC
  std::string cavity;
  bool mot_on = false;
};

struct TelemetryRecord {
  double sim_time = 0.0;    // s
  double p_science = 0.0;   // Torr
  double p_loadlock = 0.0;  // Torr
  double t_loadlock = 0.0;  // degC
  Contamination contamination;
  DeviceSummary devices;
  double atom_number = 0.0;
  std::vector<std::string> events;
};

ordered_json to_json(const TelemetryRecord& r);
TelemetryRecord record_from_json(const json& j);
std::string to_jsonl(const TelemetryRecord& r);  // single line, no newline
std::string csv_header();                        // pressure projection
std::string to_csv(const TelemetryRecord& r);

// JSONL plus optional CSV projection. Throws Error("output_unwritable").
class TelemetryWriter {
 public:
  TelemetryWriter(const std::string& jsonl_path, const std::string& csv_path = "");
  ~TelemetryWriter();
  TelemetryWriter(const TelemetryWriter&) = delete;
  TelemetryWriter& operator=(const TelemetryWriter&) = delete;
  void write(const TelemetryRecord& r);
  void close();

 private:
  std::FILE* jsonl_ = nullptr;
  std::FILE* csv_ = nullptr;
};

// --- simulation -------------------------------------------------------------

struct CommandOutcome {
  bool accepted = false;
  std::string reason;
  std::string event;
  std::optional<json> result;  // calculator report for run_transport / run_tof
};

// One apparatus instance on one simulation clock. Telemetry records are
// produced on the sim-time cadence grid and at every instant an event
// occurs, one record per instant; a record describes the state after every
// event of its instant. Not thread safe: the owner is the only stepper.
class Simulation {
 public:
  explicit Simulation(ApparatusConfig cfg);

  const ApparatusConfig& config() const { return cfg_; }
  const app::Apparatus& apparatus() const { return app_; }
  double time() const { return app_.time(); }

  // Acts at time(). Throws CommandError for out-of-range parameters; the
  // error is still logged as a rejection event.
  CommandOutcome submit(const app::DeviceCommand& cmd);
  void advance_to(double t);

  // Closes the record of the current instant so it can be taken.
  void flush();
  std::vector<TelemetryRecord> take_telemetry();

  TelemetryRecord record() const;
  ordered_json snapshot() const;

  std::optional<json> transport_result() const { return transport_; }
  std::optional<json> tof_result() const { return tof_; }

 private:
  void note(const std::string& event);
  void open_record();
  void collect_events();
  json run_transport();
  json run_tof();

  ApparatusConfig cfg_;
  app::Apparatus app_;
  std::optional<TelemetryRecord> open_;  // sim_time + events only
  std::vector<TelemetryRecord> closed_;
  std::optional<json> transport_, tof_;
};

app::Apparatus make_apparatus(const ApparatusConfig& cfg);

// --- scenarios --------------------------------------------------------------

struct ScenarioStep {
  double at = 0.0;  // s
  std::string phase;
  app::DeviceCommand command;
  bool expect_rejection = false;
};

struct Assertion {
  double at = 0.0;
  std::string quantity;  // alias or JSON pointer into the snapshot
  std::optional<double> min, max;
  std::optional<json> equals;
  std::optional<double> approx;
  double tolerance = 0.0;  // relative, with approx
  std::string label;
};

struct Scenario {
  std::string name;
  std::vector<ScenarioStep> steps;
  std::vector<Assertion> assertions;
  double end = 0.0;  // s; at least the last step or assertion
};

Scenario load_scenario(const json& j);
Scenario load_scenario_file(const std::string& path);

// Snapshot value named by an alias (P_science, T_loadlock, ...) or a JSON
// pointer. Throws CommandError("unknown_quantity").
json resolve_quantity(const ordered_json& snapshot, const std::string& quantity);

struct AssertionResult {
  std::string label;
  double at = 0.0;
  std::string quantity;
  json value;
  bool passed = false;
  std::string expectation;
};

struct RunReport {
  std::string scenario;
  double sim_time = 0.0;
  double wall_seconds = 0.0;
  std::size_t records = 0;
  std::vector<AssertionResult> assertions;
  std::vector<app::PhaseRecord> phases;
  double p_science = 0.0, p_loadlock = 0.0;
  ordered_json final_state;

  bool passed() const;
  ordered_json to_json() const;
};

struct RunOptions {
  double speedup = 1.0;  // sim seconds per wall second; 0 = paused
  bool pace = true;       // false runs as fast as possible
  std::string telemetry_path;  // empty = no JSONL file
  std::string csv_path;
  std::function<void(const TelemetryRecord&)> sink;
};

// Dispatches the steps at their sim times and evaluates assertions. A
// rejected step that was expected to be accepted aborts with ScenarioAbort
// carrying its phase. With speedup 0 the clock is paused: only steps and
// assertions at t = 0 are processed.
RunReport run(const ApparatusConfig& cfg, const Scenario& sc, const RunOptions& opt);

}  // namespace llt::engine
