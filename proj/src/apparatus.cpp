#include "llt/apparatus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "llt/errors.hpp"

namespace llt::app {
namespace {

using vac::PumpState;

bool running(PumpState s) { return s == PumpState::starting || s == PumpState::on; }

constexpr std::array<std::string_view, kVerbs.size()> kVerbNames{
    "open_gate_valve", "close_gate_valve", "open_angle_valve", "close_angle_valve",
    "open_flanges",    "seal_flanges",     "start_turbo",      "stop_turbo",
    "start_ion_pump",  "stop_ion_pump",    "set_bake",         "move_translator",
    "install_cavity",  "set_dispenser",    "run_mot",          "run_transport",
    "run_tof",
};

int pump_index(IonPump p) { return p == IonPump::science ? vac::idx::science_ion : vac::idx::loadlock_ion; }

const char* pump_name(IonPump p) { return p == IonPump::science ? "science" : "loadlock"; }

}  // namespace

std::string_view to_string(Verb v) { return kVerbNames[static_cast<std::size_t>(v)]; }

std::optional<Verb> parse_verb(std::string_view s) {
  for (std::size_t i = 0; i < kVerbNames.size(); ++i)
    if (kVerbNames[i] == s) return kVerbs[i];
  return std::nullopt;
}

std::string_view to_string(ValveState s) {
  switch (s) {
    case ValveState::closed: return "closed";
    case ValveState::opening: return "opening";
    case ValveState::open: return "open";
    case ValveState::closing: return "closing";
  }
  return "?";
}

std::string_view to_string(CavityLocation c) {
  switch (c) {
    case CavityLocation::none: return "none";
    case CavityLocation::in_loadlock: return "in_loadlock";
    case CavityLocation::in_science: return "in_science";
    case CavityLocation::on_translator: return "on_translator";
  }
  return "?";
}

double loading_rate(const EnsembleSource& src, const std::array<double, 4>& currents) {
  double r = 0.0;
  for (double i : currents) r += src.loading_rate * std::max(i - src.dispenser_threshold, 0.0);
  return r;
}

EnsembleSource ensemble_step(EnsembleSource src, double p_science,
                             const std::array<double, 4>& currents, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("ensemble_step requires dt > 0");
  if (!(p_science > 0.0)) throw PreconditionError("ensemble_step requires P > 0");
  const double tau = src.loss_constant / p_science;
  const double steady = loading_rate(src, currents) * tau;
  src.atom_number = steady + (src.atom_number - steady) * std::exp(-dt / tau);
  if (src.atom_number < 0.0) src.atom_number = 0.0;
  return src;
}

int WorkflowChecklist::current() const {
  for (int i = 0; i < 5; ++i)
    if (!phases[i].completed) return i;
  return 5;
}

std::vector<InterlockRule> make_rules(const Thresholds& th, const vac::VacuumNetwork& net) {
  using D = const DeviceState&;
  using R = const Readings&;
  using C = const DeviceCommand&;
  const double sci_start = net.pumps.at(vac::idx::science_ion).max_start_pressure;
  const double ll_start = net.pumps.at(vac::idx::loadlock_ion).max_start_pressure;
  std::vector<InterlockRule> r;
  auto add = [&](Verb v, std::string name, auto pred, std::string reason) {
    r.push_back({v, std::move(name), pred, std::move(reason)});
  };
  auto heater_off = [](D d, R, C) { return !d.bake_on; };
  auto gate_closed = [](D d, R, C) { return d.gate_valve == ValveState::closed; };

  add(Verb::open_gate_valve, "gate idle", [](D d, R, C) {
    return d.gate_valve != ValveState::opening && d.gate_valve != ValveState::closing;
  }, "gate valve moving");
  add(Verb::open_gate_valve, "gate not open", [](D d, R, C) { return d.gate_valve != ValveState::open; },
      "gate valve already open");
  add(Verb::open_gate_valve, "pressures matched", [th](D, R x, C) {
    return x.p_science <= th.gate_max_pressure && x.p_loadlock <= th.gate_max_pressure &&
           std::fabs(x.p_science - x.p_loadlock) <= th.gate_max_difference;
  }, "pressure interlock");
  add(Verb::open_gate_valve, "flanges sealed", [](D d, R, C) { return !d.flanges_open; }, "flanges open");
  add(Verb::open_gate_valve, "angle valve closed", [](D d, R, C) {
    return d.angle_valve == ValveState::closed;
  }, "angle valve open");
  add(Verb::open_gate_valve, "heater off", heater_off, "bake heater on");
  add(Verb::open_gate_valve, "loadlock cool", [th](D, R x, C) {
    return x.t_loadlock <= th.gate_max_temperature;
  }, "loadlock too hot");

  add(Verb::close_gate_valve, "gate idle", [](D d, R, C) {
    return d.gate_valve != ValveState::opening && d.gate_valve != ValveState::closing;
  }, "gate valve moving");
  add(Verb::close_gate_valve, "gate not closed", [](D d, R, C) {
    return d.gate_valve != ValveState::closed;
  }, "gate valve already closed");
  add(Verb::close_gate_valve, "translator clear", [th](D d, R, C) {
    return !d.translator_moving && d.translator_position <= th.handoff_position;
  }, "path obstructed");

  add(Verb::open_angle_valve, "angle idle", [](D d, R, C) {
    return d.angle_valve == ValveState::closed || d.angle_valve == ValveState::open;
  }, "angle valve moving");
  add(Verb::open_angle_valve, "angle not open", [](D d, R, C) {
    return d.angle_valve != ValveState::open;
  }, "angle valve already open");
  add(Verb::open_angle_valve, "gate closed", gate_closed, "gate valve open");
  // With the turbo stopped, opening the angle valve vents the loadlock.
  add(Verb::open_angle_valve, "vent: ion pump off", [](D d, R, C) {
    return running(d.turbo) || !running(d.ion_loadlock);
  }, "ion pump running");
  add(Verb::open_angle_valve, "vent: heater off", [](D d, R, C) {
    return running(d.turbo) || !d.bake_on;
  }, "bake heater on");

  add(Verb::close_angle_valve, "angle idle", [](D d, R, C) {
    return d.angle_valve == ValveState::closed || d.angle_valve == ValveState::open;
  }, "angle valve moving");
  add(Verb::close_angle_valve, "angle not closed", [](D d, R, C) {
    return d.angle_valve != ValveState::closed;
  }, "angle valve already closed");

  add(Verb::open_flanges, "flanges sealed", [](D d, R, C) { return !d.flanges_open; }, "flanges already open");
  add(Verb::open_flanges, "gate closed", gate_closed, "gate valve open");
  add(Verb::open_flanges, "loadlock vented", [th](D, R x, C) {
    return x.p_loadlock >= th.flange_min_pressure;
  }, "loadlock under vacuum");
  add(Verb::open_flanges, "pumps off", [](D d, R, C) {
    return !running(d.turbo) && !running(d.ion_loadlock);
  }, "pumps running");
  add(Verb::open_flanges, "heater off", heater_off, "bake heater on");

  add(Verb::seal_flanges, "flanges open", [](D d, R, C) { return d.flanges_open; }, "flanges already sealed");

  add(Verb::start_turbo, "turbo stopped", [](D d, R, C) { return !running(d.turbo); }, "turbo already running");
  add(Verb::stop_turbo, "turbo running", [](D d, R, C) { return running(d.turbo); }, "turbo already stopped");
  add(Verb::stop_turbo, "angle valve closed", [](D d, R, C) {
    return d.angle_valve == ValveState::closed;
  }, "angle valve open");

  add(Verb::start_ion_pump, "pump stopped", [](D d, R, C c) {
    return (c.pump == IonPump::science ? d.ion_science : d.ion_loadlock) != PumpState::on;
  }, "ion pump already running");
  add(Verb::start_ion_pump, "not venting", [](D, R x, C c) {
    return c.pump == IonPump::science || !x.venting;
  }, "loadlock venting");
  add(Verb::start_ion_pump, "start pressure", [sci_start, ll_start](D, R x, C c) {
    return c.pump == IonPump::science ? x.p_science <= sci_start : x.p_loadlock <= ll_start;
  }, "pressure too high for ion pump");
  add(Verb::stop_ion_pump, "pump running", [](D d, R, C c) {
    return running(c.pump == IonPump::science ? d.ion_science : d.ion_loadlock);
  }, "ion pump already stopped");

  add(Verb::set_bake, "setpoint", [th](D, R, C c) { return c.setpoint <= th.bake_limit; },
      "Torr-seal limit 110 °C");
  add(Verb::set_bake, "heat: gate closed", [](D d, R, C c) {
    return !c.on || d.gate_valve == ValveState::closed;
  }, "gate valve open");
  add(Verb::set_bake, "heat: flanges sealed", [](D d, R, C c) { return !c.on || !d.flanges_open; },
      "flanges open");
  add(Verb::set_bake, "heat: not venting", [](D, R x, C c) { return !c.on || !x.venting; },
      "loadlock venting");

  add(Verb::move_translator, "translator idle", [](D d, R, C) { return !d.translator_moving; },
      "translator moving");
  add(Verb::move_translator, "new target", [](D d, R, C c) {
    return c.target != d.translator_position;
  }, "translator already at target");
  add(Verb::move_translator, "gate bore clear", [th](D d, R, C c) {
    const bool through = c.target > th.handoff_position || d.translator_position > th.handoff_position;
    return !through || d.gate_valve == ValveState::open;
  }, "path obstructed");

  add(Verb::install_cavity, "flanges open", [](D d, R, C) { return d.flanges_open; }, "flanges sealed");
  add(Verb::install_cavity, "carrier retracted", [th](D d, R, C) {
    return !d.translator_moving && d.translator_position <= th.handoff_position;
  }, "translator extended");

  add(Verb::run_mot, "science vacuum", [th](D, R x, C c) {
    return !c.on || x.p_science <= th.mot_max_pressure;
  }, "pressure interlock");
  add(Verb::run_transport, "mot on", [](D d, R, C) { return d.mot_on; }, "MOT off");
  add(Verb::run_tof, "mot on", [](D d, R, C) { return d.mot_on; }, "MOT off");
  return r;
}

Apparatus::Apparatus(ApparatusParams params, vac::VacuumNetwork net)
    : params_(std::move(params)), net_(std::move(net)), ens_(params_.ensemble) {
  vac::validate(net_);
  if (net_.chambers.size() < 2 || net_.valves.size() < 2 || net_.paths.size() < 2 || net_.pumps.size() < 3)
    throw PreconditionError("apparatus needs the two-chamber network layout");
  rules_ = make_rules(params_.thresholds, net_);

  const auto& gate = net_.valves[vac::idx::gate_valve];
  dev_.gate_progress = gate.fraction;
  dev_.gate_valve = gate.fraction >= 1.0 ? ValveState::open : ValveState::closed;
  dev_.gate_progress = dev_.gate_valve == ValveState::open ? 1.0 : 0.0;
  net_.valves[vac::idx::gate_valve].fraction = dev_.gate_progress;
  dev_.angle_valve = net_.valves[vac::idx::angle_valve].fraction > 0.0 ? ValveState::open : ValveState::closed;
  net_.valves[vac::idx::angle_valve].fraction = dev_.angle_valve == ValveState::open ? 1.0 : 0.0;
  dev_.flanges_open = net_.chambers[vac::idx::loadlock].open_to_air;

  const bool cavity_in_science = !net_.chambers[vac::idx::science].payloads.empty();
  const bool cavity_in_loadlock = !net_.chambers[vac::idx::loadlock].payloads.empty();
  dev_.translator_position = dev_.gate_valve == ValveState::open && !cavity_in_loadlock
                                 ? params_.translator_throw
                                 : 0.0;
  dev_.translator_target = dev_.translator_position;
  dev_.cavity = cavity_in_science    ? CavityLocation::in_science
                : cavity_in_loadlock ? CavityLocation::in_loadlock
                                     : CavityLocation::none;
  for (auto& ch : net_.chambers) ch.ramp_rate = params_.actuation.bake_ramp;
  auto& ll = net_.chambers[vac::idx::loadlock];
  dev_.bake_on = ll.temperature_target != params_.actuation.ambient;
  dev_.bake_setpoint = dev_.bake_on ? ll.temperature_target : params_.actuation.ambient;
  dev_.turbo = net_.pumps[vac::idx::turbo].state;
  dev_.ion_science = net_.pumps[vac::idx::science_ion].state;
  dev_.ion_loadlock = net_.pumps[vac::idx::loadlock_ion].state;
  checklist_.phases[0].started = net_.time;
  sync_vent();
}

Readings Apparatus::readings() const {
  const auto& ll = net_.chambers[vac::idx::loadlock];
  return {net_.chambers[vac::idx::science].pressure, ll.pressure, ll.temperature,
          net_.paths[vac::idx::vent_path].enabled && dev_.angle_valve != ValveState::closed};
}

SubmitResult Apparatus::submit(const DeviceCommand& cmd) {
  const std::string verb(to_string(cmd.verb));
  switch (cmd.verb) {
    case Verb::move_translator:
      if (!(cmd.target >= 0.0 && cmd.target <= params_.translator_throw))
        throw CommandError("parameter_out_of_range", "translator target outside [0, throw]");
      break;
    case Verb::set_dispenser:
      if (cmd.index < 0 || cmd.index >= 4)
        throw CommandError("parameter_out_of_range", "dispenser index outside 0..3");
      if (!(cmd.current >= 0.0 && cmd.current <= ens_.max_current))
        throw CommandError("parameter_out_of_range", "dispenser current outside [0, max]");
      break;
    case Verb::set_bake:
      if (!std::isfinite(cmd.setpoint) || cmd.setpoint < -50.0 || cmd.setpoint > 400.0)
        throw CommandError("parameter_out_of_range", "bake setpoint outside [-50, 400] degC");
      break;
    default:
      break;
  }

  SubmitResult res;
  if (!cmd.force) {
    const Readings rd = readings();
    for (const auto& rule : rules_) {
      if (rule.verb != cmd.verb || rule.allows(dev_, rd, cmd)) continue;
      res.reason = rule.reason;
      res.event = "rejected:" + verb + ":" + rule.reason;
      return res;
    }
  }
  apply(cmd);
  res.accepted = true;
  res.event = (cmd.force ? "forced:" : "accepted:") + verb;
  if (cmd.force)
    for (const auto& v : violations()) events_.push_back("violation:" + v);
  update_checklist();
  return res;
}

void Apparatus::apply(const DeviceCommand& cmd) {
  const double now = net_.time;
  const auto& act = params_.actuation;
  auto& ll = net_.chambers[vac::idx::loadlock];
  switch (cmd.verb) {
    case Verb::open_gate_valve: start_gate(true); break;
    case Verb::close_gate_valve: start_gate(false); break;
    case Verb::open_angle_valve:
      dev_.angle_valve = ValveState::opening;
      schedule(now + act.angle_time, Kind::angle_done, ++angle_gen_, 1.0);
      break;
    case Verb::close_angle_valve:
      dev_.angle_valve = ValveState::closing;
      schedule(now + act.angle_time, Kind::angle_done, ++angle_gen_, 0.0);
      break;
    case Verb::open_flanges:
      dev_.flanges_open = true;
      ll.open_to_air = true;
      ll.pressure = vac::kAtmosphere;
      ll.walls.contamination = 1.0;
      for (auto& p : ll.payloads) p.contamination = 1.0;
      break;
    case Verb::seal_flanges:
      dev_.flanges_open = false;
      ll.open_to_air = false;
      break;
    case Verb::start_turbo:
      dev_.turbo = PumpState::starting;
      schedule(now + act.turbo_spinup, Kind::turbo_ready, ++turbo_gen_);
      break;
    case Verb::stop_turbo:
      dev_.turbo = PumpState::off;
      ++turbo_gen_;
      break;
    case Verb::start_ion_pump: {
      const int i = pump_index(cmd.pump);
      net_.pumps[i].state = PumpState::on;
      net_.pumps[i].over_pressure_time = 0.0;
      (cmd.pump == IonPump::science ? dev_.ion_science : dev_.ion_loadlock) = PumpState::on;
      break;
    }
    case Verb::stop_ion_pump:
      (cmd.pump == IonPump::science ? dev_.ion_science : dev_.ion_loadlock) = PumpState::off;
      break;
    case Verb::set_bake:
      dev_.bake_setpoint = cmd.setpoint;
      dev_.bake_on = cmd.on;
      ll.temperature_target = cmd.on ? cmd.setpoint : act.ambient;
      break;
    case Verb::move_translator: start_translator(cmd.target); break;
    case Verb::install_cavity: {
      ll.payloads.clear();
      ll.payloads.push_back({"cavity", params_.cavity_area, 1.0});
      auto& sci = net_.chambers[vac::idx::science];
      sci.payloads.clear();
      dev_.cavity = CavityLocation::in_loadlock;
      ++dev_.cavities_installed;
      break;
    }
    case Verb::set_dispenser: dev_.dispensers[cmd.index] = cmd.current; break;
    case Verb::run_mot:
      dev_.mot_on = cmd.on;
      if (!cmd.on) ens_.atom_number = 0.0;
      break;
    case Verb::run_transport:
    case Verb::run_tof:
      break;  // calculators are run by the engine; nothing to actuate here
  }
  sync_pumps();
  sync_vent();
}

void Apparatus::schedule(double t, Kind k, std::uint64_t gen, double value) {
  pending_.push_back({t, seq_++, k, gen, value});
}

void Apparatus::sync_pumps() {
  net_.pumps[vac::idx::turbo].state = dev_.turbo;
  auto set_ion = [&](int i, PumpState s) {
    // A trip latches until the operator restarts the pump.
    if (net_.pumps[i].state == PumpState::tripped && s == PumpState::on) return;
    net_.pumps[i].state = s;
  };
  set_ion(vac::idx::science_ion, dev_.ion_science);
  set_ion(vac::idx::loadlock_ion, dev_.ion_loadlock);
}

void Apparatus::sync_vent() {
  // The vent line opens onto the turbo foreline whenever the turbo is not
  // running; the angle valve then decides whether air reaches the loadlock.
  net_.paths[vac::idx::vent_path].enabled = !running(dev_.turbo);
}

void Apparatus::start_gate(bool open) {
  const auto& act = params_.actuation;
  const std::uint64_t gen = ++gate_gen_;
  dev_.gate_valve = open ? ValveState::opening : ValveState::closing;
  const double step = act.gate_tick / act.gate_time;
  const double remaining = open ? 1.0 - dev_.gate_progress : dev_.gate_progress;
  const int ticks = std::max(1, static_cast<int>(std::ceil(remaining / step - 1e-9)));
  for (int k = 1; k <= ticks; ++k) {
    const double frac = k == ticks ? (open ? 1.0 : 0.0)
                                   : dev_.gate_progress + (open ? 1.0 : -1.0) * k * step;
    schedule(net_.time + k * act.gate_tick, Kind::gate_tick, gen, frac);
  }
}

double Apparatus::translator_at(double t) const {
  if (!dev_.translator_moving) return dev_.translator_position;
  const double dir = dev_.translator_target >= translator_x0_ ? 1.0 : -1.0;
  const double x = translator_x0_ + dir * params_.actuation.translator_speed * (t - translator_t0_);
  return dir > 0 ? std::min(x, dev_.translator_target) : std::max(x, dev_.translator_target);
}

void Apparatus::start_translator(double target) {
  const double now = net_.time;
  const double x0 = translator_at(now);
  const std::uint64_t gen = ++translator_gen_;
  translator_x0_ = x0;
  translator_t0_ = now;
  dev_.translator_position = x0;
  dev_.translator_target = target;
  dev_.translator_moving = true;
  const double speed = params_.actuation.translator_speed;
  const double mid = 0.5 * params_.translator_throw;
  if ((x0 < mid) != (target < mid)) schedule(now + std::fabs(mid - x0) / speed, Kind::translator_cross, gen, target >= mid);
  schedule(now + std::fabs(target - x0) / speed, Kind::translator_arrive, gen);
  if (dev_.cavity != CavityLocation::none) dev_.cavity = CavityLocation::on_translator;
}

void Apparatus::move_payload(bool to_science) {
  auto& from = net_.chambers[to_science ? vac::idx::loadlock : vac::idx::science];
  auto& to = net_.chambers[to_science ? vac::idx::science : vac::idx::loadlock];
  for (auto& p : from.payloads) to.payloads.push_back(std::move(p));
  from.payloads.clear();
}

void Apparatus::fire(const Pending& p) {
  switch (p.kind) {
    case Kind::gate_tick:
      if (p.generation != gate_gen_) return;
      dev_.gate_progress = p.value;
      net_.valves[vac::idx::gate_valve].fraction = p.value;
      if (p.value >= 1.0) {
        dev_.gate_valve = ValveState::open;
        events_.push_back("completed:gate_valve:open");
      } else if (p.value <= 0.0) {
        dev_.gate_valve = ValveState::closed;
        events_.push_back("completed:gate_valve:closed");
      }
      break;
    case Kind::angle_done:
      if (p.generation != angle_gen_) return;
      dev_.angle_valve = p.value > 0.5 ? ValveState::open : ValveState::closed;
      net_.valves[vac::idx::angle_valve].fraction = p.value;
      events_.push_back(std::string("completed:angle_valve:") + (p.value > 0.5 ? "open" : "closed"));
      break;
    case Kind::translator_cross:
      if (p.generation != translator_gen_) return;
      move_payload(p.value > 0.5);
      break;
    case Kind::translator_arrive: {
      if (p.generation != translator_gen_) return;
      dev_.translator_position = dev_.translator_target;
      dev_.translator_moving = false;
      const bool in_science = dev_.translator_position >= 0.5 * params_.translator_throw;
      if (dev_.cavity == CavityLocation::on_translator)
        dev_.cavity = in_science ? CavityLocation::in_science : CavityLocation::in_loadlock;
      char buf[64];
      std::snprintf(buf, sizeof buf, "completed:translator:%.4f", dev_.translator_position);
      events_.emplace_back(buf);
      break;
    }
    case Kind::turbo_ready:
      if (p.generation != turbo_gen_ || dev_.turbo != PumpState::starting) return;
      dev_.turbo = PumpState::on;
      events_.push_back("completed:turbo:on");
      break;
  }
  sync_pumps();
  sync_vent();
}

double Apparatus::next_transition() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& p : pending_) t = std::min(t, p.t);
  return t;
}

void Apparatus::integrate(double t) {
  const double dt = t - net_.time;
  if (dt <= 0.0) return;
  const double p0 = net_.chambers[vac::idx::science].pressure;
  std::array<vac::PumpState, 2> before{net_.pumps[vac::idx::science_ion].state,
                                       net_.pumps[vac::idx::loadlock_ion].state};
  vac::step(net_, dt);
  if (dev_.mot_on) ens_ = ensemble_step(ens_, std::max(p0, vac::kPressureFloor), dev_.dispensers, dt);
  for (int i = 0; i < 2; ++i) {
    const auto now = net_.pumps[i].state;
    if (now == PumpState::tripped && before[i] != PumpState::tripped) {
      (i == 0 ? dev_.ion_science : dev_.ion_loadlock) = PumpState::tripped;
      events_.push_back(std::string("tripped:ion_pump:") + pump_name(i == 0 ? IonPump::science : IonPump::loadlock));
    }
  }
  bake_peak_ = std::max(bake_peak_, net_.chambers[vac::idx::loadlock].temperature);
}

void Apparatus::advance_to(double t) {
  if (t < net_.time) throw PreconditionError("advance_to cannot move the clock backwards");
  while (true) {
    auto it = std::min_element(pending_.begin(), pending_.end(), [](const Pending& a, const Pending& b) {
      return a.t != b.t ? a.t < b.t : a.seq < b.seq;
    });
    if (it == pending_.end() || it->t > t) break;
    const Pending p = *it;
    pending_.erase(it);
    integrate(p.t);
    fire(p);
    update_checklist();
  }
  integrate(t);
  if (dev_.translator_moving) dev_.translator_position = translator_at(t);
  update_checklist();
}

void Apparatus::update_checklist() {
  const int k = checklist_.current();
  if (k >= 5) return;
  const auto& th = params_.thresholds;
  const auto& ll = net_.chambers[vac::idx::loadlock];
  bool done = false;
  switch (k) {
    case 0:
      done = dev_.gate_valve == ValveState::closed && !dev_.translator_moving &&
             dev_.translator_position <= th.handoff_position;
      break;
    case 1:
      done = dev_.cavities_installed > installs_at_cycle_start_;
      break;
    case 2:
      done = !dev_.flanges_open && dev_.ion_loadlock == PumpState::on && !dev_.bake_on &&
             bake_peak_ >= th.bake_complete_temperature;
      break;
    case 3:
      done = dev_.angle_valve == ValveState::closed && !dev_.bake_on &&
             ll.temperature <= th.gate_max_temperature;
      break;
    case 4:
      done = dev_.gate_valve == ValveState::open && !dev_.translator_moving &&
             dev_.translator_position >= params_.translator_throw - 1e-9 &&
             dev_.cavity == CavityLocation::in_science;
      break;
  }
  if (!done) return;
  auto& ph = checklist_.phases[k];
  // One completion per instant keeps completion times strictly increasing.
  if (k > 0 && checklist_.phases[k - 1].completed && *checklist_.phases[k - 1].completed >= net_.time) return;
  ph.completed = net_.time;
  if (k == 1) bake_peak_ = -std::numeric_limits<double>::infinity();
  if (k + 1 < 5) checklist_.phases[k + 1].started = net_.time;
  events_.push_back(std::string("phase:") + ph.id + ":complete");
}

std::vector<std::string> Apparatus::violations() const {
  std::vector<std::string> v;
  const auto& th = params_.thresholds;
  const auto& sci = net_.chambers[vac::idx::science];
  const auto& ll = net_.chambers[vac::idx::loadlock];
  if (dev_.bake_setpoint > th.bake_limit) v.push_back("bake setpoint above Torr-seal limit");
  if (translator_at(net_.time) > th.handoff_position && dev_.gate_valve != ValveState::open)
    v.push_back("translator in gate bore with gate not open");
  if (dev_.flanges_open && ll.pressure != vac::kAtmosphere) v.push_back("flanges open without atmosphere");
  const bool ll_to_air = dev_.flanges_open || readings().venting;
  if (ll_to_air && dev_.gate_valve != ValveState::closed) v.push_back("science chamber open to air");
  if (sci.pressure >= 1.0) v.push_back("science chamber vented");
  return v;
}

std::vector<std::string> Apparatus::take_events() {
  std::vector<std::string> out;
  out.swap(events_);
  return out;
}

}  // namespace llt::app
