#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llt/vacuum.hpp"

namespace llt::app {

enum class Verb {
  open_gate_valve,
  close_gate_valve,
  open_angle_valve,
  close_angle_valve,
  open_flanges,
  seal_flanges,
  start_turbo,
  stop_turbo,
  start_ion_pump,
  stop_ion_pump,
  set_bake,
  move_translator,
  install_cavity,
  set_dispenser,
  run_mot,
  run_transport,
  run_tof,
};

inline constexpr std::array kVerbs{
    Verb::open_gate_valve, Verb::close_gate_valve, Verb::open_angle_valve, Verb::close_angle_valve,
    Verb::open_flanges,    Verb::seal_flanges,     Verb::start_turbo,      Verb::stop_turbo,
    Verb::start_ion_pump,  Verb::stop_ion_pump,    Verb::set_bake,         Verb::move_translator,
    Verb::install_cavity,  Verb::set_dispenser,    Verb::run_mot,          Verb::run_transport,
    Verb::run_tof,
};

std::string_view to_string(Verb v);
std::optional<Verb> parse_verb(std::string_view s);

enum class IonPump { science, loadlock };

// One operator action. Only the parameters relevant to `verb` are read.
struct DeviceCommand {
  Verb verb = Verb::close_gate_valve;
  bool force = false;      // bypass interlocks; logged as a violation event
  IonPump pump = IonPump::loadlock;  // start/stop_ion_pump
  double setpoint = 20.0;  // degC, set_bake
  bool on = true;          // set_bake, run_mot
  double target = 0.0;     // m, move_translator
  int index = 0;           // set_dispenser
  double current = 0.0;    // A, set_dispenser
};

enum class ValveState { closed, opening, open, closing };
enum class CavityLocation { none, in_loadlock, in_science, on_translator };

std::string_view to_string(ValveState s);
std::string_view to_string(CavityLocation c);

struct DeviceState {
  ValveState gate_valve = ValveState::open;
  double gate_progress = 1.0;  // 0 closed .. 1 open
  ValveState angle_valve = ValveState::closed;
  bool flanges_open = false;
  double translator_position = 1.524;  // m, 0 = retracted into the loadlock
  double translator_target = 1.524;
  bool translator_moving = false;
  vac::PumpState turbo = vac::PumpState::off;
  vac::PumpState ion_science = vac::PumpState::on;
  vac::PumpState ion_loadlock = vac::PumpState::on;
  double bake_setpoint = 20.0;  // degC
  bool bake_on = false;
  std::array<double, 4> dispensers{};  // A
  CavityLocation cavity = CavityLocation::in_science;
  bool mot_on = false;
  int cavities_installed = 0;
};

// Quantities the interlock predicates may look at besides device state.
struct Readings {
  double p_science = 0.0;   // Torr
  double p_loadlock = 0.0;  // Torr
  double t_loadlock = 20.0;  // degC
  bool venting = false;      // angle valve open onto the vent line
};

struct Thresholds {
  double gate_max_pressure = 1e-8;     // Torr, both chambers
  double gate_max_difference = 1e-6;   // Torr
  double gate_max_temperature = 30.0;  // degC, loadlock
  double handoff_position = 0.05;      // m; beyond it the carrier is in the gate bore
  double flange_min_pressure = 700.0;  // Torr
  double bake_limit = 110.0;           // degC, Torr-seal
  double mot_max_pressure = 1e-8;      // Torr, science
  double bake_complete_temperature = 100.0;  // degC reached before phase c counts as baked
};

struct Actuation {
  double gate_time = 5.0;        // s, full stroke
  double gate_tick = 0.5;        // s between partial-opening updates
  double angle_time = 2.0;       // s
  double translator_speed = 0.005;  // m/s
  double turbo_spinup = 120.0;   // s
  double bake_ramp = 20.0 / 3600.0;  // degC/s
  double ambient = 20.0;         // degC
};

struct EnsembleSource {
  double atom_number = 0.0;
  double loading_rate = 1e7;        // atoms/(s A) above threshold
  double dispenser_threshold = 2.5;  // A
  double loss_constant = 3e-9;      // Torr s; lifetime = K / P
  double max_current = 10.0;        // A, dispenser envelope
};

// Exact solution of dN/dt = R - N P / K over dt at fixed P and currents.
EnsembleSource ensemble_step(EnsembleSource src, double p_science,
                             const std::array<double, 4>& currents, double dt);
double loading_rate(const EnsembleSource& src, const std::array<double, 4>& currents);

struct InterlockRule {
  Verb verb;
  std::string name;
  std::function<bool(const DeviceState&, const Readings&, const DeviceCommand&)> allows;
  std::string reason;
};

// Guards in evaluation order; the first one that fails names the rejection.
std::vector<InterlockRule> make_rules(const Thresholds& th, const vac::VacuumNetwork& net);

struct SubmitResult {
  bool accepted = false;
  std::string reason;
  std::string event;  // telemetry event string
};

struct PhaseRecord {
  char id;
  std::string title;
  std::optional<double> started;
  std::optional<double> completed;
};

struct WorkflowChecklist {
  std::array<PhaseRecord, 5> phases{{{'a', "retract translator, close gate valve", 0.0, {}},
                                     {'b', "vent loadlock, open flanges, install cavity", {}, {}},
                                     {'c', "seal, pump and bake loadlock", {}, {}},
                                     {'d', "close angle valve, cool loadlock", {}, {}},
                                     {'e', "open gate valve, extend translator", {}, {}}}};
  // Index of the first incomplete phase, 5 when the cycle is done.
  int current() const;
  bool complete() const { return current() == 5; }
};

struct ApparatusParams {
  Thresholds thresholds;
  Actuation actuation;
  EnsembleSource ensemble;
  double translator_throw = 1.524;  // m
  double cavity_area = 2e3;         // cm^2 of fresh cavity surface per install
};

// Device state machine wrapped around the vacuum network it actuates. The
// caller owns the clock: submit() acts at time(), advance_to() runs device
// transitions and vacuum dynamics with integration stopping at each
// transition.
class Apparatus {
 public:
  Apparatus(ApparatusParams params, vac::VacuumNetwork net);

  SubmitResult submit(const DeviceCommand& cmd);
  void advance_to(double t);

  double time() const { return net_.time; }
  // Sim time of the next pending device transition, +inf if none.
  double next_transition() const;

  const DeviceState& devices() const { return dev_; }
  const vac::VacuumNetwork& vacuum() const { return net_; }
  const EnsembleSource& ensemble() const { return ens_; }
  const WorkflowChecklist& checklist() const { return checklist_; }
  const ApparatusParams& params() const { return params_; }
  Readings readings() const;

  // Device-state invariants currently broken; empty unless a forced
  // command has been applied.
  std::vector<std::string> violations() const;

  // Events raised by transitions since the last call (completions, trips,
  // phase completions).
  std::vector<std::string> take_events();

 private:
  enum class Kind { gate_tick, angle_done, translator_cross, translator_arrive, turbo_ready };
  struct Pending {
    double t;
    std::uint64_t seq;
    Kind kind;
    std::uint64_t generation;
    double value;
  };

  void apply(const DeviceCommand& cmd);
  void fire(const Pending& p);
  void schedule(double t, Kind k, std::uint64_t gen, double value = 0.0);
  void sync_pumps();
  void sync_vent();
  void start_gate(bool open);
  void start_translator(double target);
  void move_payload(bool to_science);
  void update_checklist();
  void integrate(double t);
  double translator_at(double t) const;

  ApparatusParams params_;
  vac::VacuumNetwork net_;
  DeviceState dev_;
  EnsembleSource ens_;
  WorkflowChecklist checklist_;
  std::vector<InterlockRule> rules_;
  std::vector<Pending> pending_;
  std::vector<std::string> events_;
  std::uint64_t seq_ = 0;
  std::uint64_t gate_gen_ = 0, angle_gen_ = 0, translator_gen_ = 0, turbo_gen_ = 0;
  double translator_t0_ = 0.0, translator_x0_ = 0.0;
  int installs_at_cycle_start_ = 0;
  double bake_peak_ = -std::numeric_limits<double>::infinity();
};

}  // namespace llt::app
