#include <bit>
#include <cmath>
#include <cstdio>

#include "llt/conveyor.hpp"
#include "llt/engine.hpp"
#include "llt/errors.hpp"
#include "llt/rng.hpp"
#include "llt/tof.hpp"

namespace llt::engine {
namespace {

std::string str(std::string_view s) { return std::string(s); }

std::optional<double> cavity_contamination(const vac::Chamber& ch) {
  if (ch.payloads.empty()) return std::nullopt;
  return ch.payloads.front().contamination;
}

ordered_json nullable(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

app::Apparatus make_apparatus(const ApparatusConfig& cfg) {
  vac::VacuumNetwork net = cfg.vacuum;
  if (cfg.settle_initial_pressures) {
    const auto p = vac::steady_state(net);
    for (std::size_t i = 0; i < net.chambers.size(); ++i)
      if (!net.chambers[i].open_to_air) net.chambers[i].pressure = p[i];
  }
  return app::Apparatus(cfg.apparatus, std::move(net));
}

Simulation::Simulation(ApparatusConfig cfg) : cfg_(std::move(cfg)), app_(make_apparatus(cfg_)) {
  open_record();
}

void Simulation::open_record() {
  TelemetryRecord r;
  r.sim_time = time();
  open_ = std::move(r);
}

void Simulation::note(const std::string& event) {
  if (open_ && open_->sim_time != time()) flush();
  if (!open_) open_record();
  open_->events.push_back(event);
}

void Simulation::collect_events() {
  for (auto& e : app_.take_events()) note(e);
}

void Simulation::flush() {
  if (!open_) return;
  TelemetryRecord r = record();
  r.sim_time = open_->sim_time;
  r.events = std::move(open_->events);
  closed_.push_back(std::move(r));
  open_.reset();
}

std::vector<TelemetryRecord> Simulation::take_telemetry() {
  std::vector<TelemetryRecord> out;
  out.swap(closed_);
  return out;
}

CommandOutcome Simulation::submit(const app::DeviceCommand& cmd) {
  CommandOutcome out;
  app::SubmitResult res;
  try {
    res = app_.submit(cmd);
  } catch (const CommandError& e) {
    note("rejected:" + str(app::to_string(cmd.verb)) + ":" + e.kind());
    throw;
  }
  out.accepted = res.accepted;
  out.reason = res.reason;
  out.event = res.event;
  note(res.event);
  collect_events();
  if (res.accepted && cmd.verb == app::Verb::run_transport) {
    out.result = run_transport();
    char buf[160];
    std::snprintf(buf, sizeof buf, "result:transport:survival=%.4f,duration_ms=%.2f",
                  (*out.result)["survival_fraction"].get<double>(), 1e3 * (*out.result)["duration"].get<double>());
    note(buf);
  } else if (res.accepted && cmd.verb == app::Verb::run_tof) {
    out.result = run_tof();
    char buf[160];
    std::snprintf(buf, sizeof buf, "result:tof:temperature_uK=%.4f", 1e6 * (*out.result)["temperature"].get<double>());
    note(buf);
  }
  return out;
}

void Simulation::advance_to(double t) {
  if (t < time()) throw PreconditionError("simulation clock cannot move backwards");
  const double cad = cfg_.telemetry_cadence;
  while (true) {
    const double now = time();
    const double tc = (std::floor(now / cad + 1e-9) + 1.0) * cad;
    const double next = std::min({t, tc, app_.next_transition()});
    if (next > now && open_) flush();
    app_.advance_to(next);
    collect_events();
    if (next == tc && !open_) open_record();
    if (time() >= t && app_.next_transition() > t) break;
  }
}

TelemetryRecord Simulation::record() const {
  const auto& net = app_.vacuum();
  const auto& sci = net.chambers[vac::idx::science];
  const auto& ll = net.chambers[vac::idx::loadlock];
  const auto& d = app_.devices();
  TelemetryRecord r;
  r.sim_time = time();
  r.p_science = sci.pressure;
  r.p_loadlock = ll.pressure;
  r.t_loadlock = ll.temperature;
  r.contamination = {sci.walls.contamination, ll.walls.contamination, cavity_contamination(sci),
                     cavity_contamination(ll)};
  r.devices.gate_valve = str(app::to_string(d.gate_valve));
  r.devices.angle_valve = str(app::to_string(d.angle_valve));
  r.devices.flanges_open = d.flanges_open;
  r.devices.translator = d.translator_position;
  r.devices.turbo = str(vac::to_string(net.pumps[vac::idx::turbo].state));
  r.devices.ion_science = str(vac::to_string(net.pumps[vac::idx::science_ion].state));
  r.devices.ion_loadlock = str(vac::to_string(net.pumps[vac::idx::loadlock_ion].state));
  r.devices.bake_on = d.bake_on;
  r.devices.bake_setpoint = d.bake_setpoint;
  r.devices.cavity = str(app::to_string(d.cavity));
  r.devices.mot_on = d.mot_on;
  r.atom_number = app_.ensemble().atom_number;
  return r;
}

ordered_json Simulation::snapshot() const {
  const auto& net = app_.vacuum();
  const auto& d = app_.devices();
  auto rng = substream(cfg_.seeds.gauge, std::bit_cast<std::uint64_t>(time()));

  auto chamber = [&](const vac::Chamber& ch) {
    const auto g = vac::gauge_read(ch, rng);
    ordered_json j;
    j["pressure"] = ch.pressure;
    j["gauge"] = {{"torr", g.torr}, {"over_range", g.over_range}};
    j["temperature"] = ch.temperature;
    j["temperature_target"] = ch.temperature_target;
    j["open_to_air"] = ch.open_to_air;
    j["contamination"] = {{"walls", ch.walls.contamination}, {"cavity", nullable(cavity_contamination(ch))}};
    return j;
  };

  ordered_json s;
  s["sim_time"] = time();
  s["chambers"]["science"] = chamber(net.chambers[vac::idx::science]);
  s["chambers"]["loadlock"] = chamber(net.chambers[vac::idx::loadlock]);
  s["pumps"]["science_ion"] = str(vac::to_string(net.pumps[vac::idx::science_ion].state));
  s["pumps"]["loadlock_ion"] = str(vac::to_string(net.pumps[vac::idx::loadlock_ion].state));
  s["pumps"]["turbo"] = str(vac::to_string(net.pumps[vac::idx::turbo].state));

  ordered_json dev;
  dev["gate_valve"] = str(app::to_string(d.gate_valve));
  dev["gate_progress"] = d.gate_progress;
  dev["angle_valve"] = str(app::to_string(d.angle_valve));
  dev["venting"] = app_.readings().venting;
  dev["flanges_open"] = d.flanges_open;
  dev["translator"] = {{"position", d.translator_position},
                       {"target", d.translator_target},
                       {"moving", d.translator_moving},
                       {"throw", app_.params().translator_throw}};
  dev["bake"] = {{"on", d.bake_on}, {"setpoint", d.bake_setpoint}};
  dev["dispensers"] = d.dispensers;
  dev["cavity"] = str(app::to_string(d.cavity));
  dev["cavities_installed"] = d.cavities_installed;
  dev["mot_on"] = d.mot_on;
  s["devices"] = std::move(dev);

  const auto& ens = app_.ensemble();
  s["ensemble"] = {{"atom_number", ens.atom_number}, {"loading_rate", app::loading_rate(ens, d.dispensers)}};

  const auto& cl = app_.checklist();
  ordered_json phases = ordered_json::array();
  for (const auto& p : cl.phases) {
    ordered_json ph;
    ph["id"] = std::string(1, p.id);
    ph["title"] = p.title;
    ph["started"] = nullable(p.started);
    ph["completed"] = nullable(p.completed);
    phases.push_back(std::move(ph));
  }
  const int cur = cl.current();
  s["checklist"] = {{"current", cur < 5 ? ordered_json(std::string(1, cl.phases[cur].id)) : ordered_json(nullptr)},
                    {"complete", cl.complete()},
                    {"phases", std::move(phases)}};
  s["violations"] = app_.violations();
  s["results"] = {{"transport", transport_ ? ordered_json(*transport_) : ordered_json(nullptr)},
                  {"tof", tof_ ? ordered_json(*tof_) : ordered_json(nullptr)}};
  return s;
}

json Simulation::run_transport() {
  if (transport_) return *transport_;
  const auto& t = cfg_.transport;
  const auto plan = conveyor::plan_transport(t.distance, t.v_max, t.a_max);
  const auto res = conveyor::simulate_transport(cfg_.lattice, plan, t.temperature, t.atoms, cfg_.seeds.transport);
  transport_ = json{{"distance", t.distance},
                    {"duration", plan.duration},
                    {"atoms", t.atoms},
                    {"temperature", t.temperature},
                    {"survival_fraction", res.survival_fraction},
                    {"mean_energy_gain_uK", res.mean_energy_gain / phys::kB * 1e6},
                    {"depth_uK", res.depth / phys::kB * 1e6}};
  return *transport_;
}

json Simulation::run_tof() {
  if (tof_) return *tof_;
  const auto& t = cfg_.tof;
  const auto run = tof::synthetic_run(t.cloud, t.times, t.render, cfg_.seeds.tof);
  tof_ = json{{"true_temperature", t.cloud.temperature},
              {"temperature", run.fit.temperature},
              {"temperature_ci", {run.fit.temperature_ci_low, run.fit.temperature_ci_high}},
              {"sigma0", run.fit.sigma0},
              {"confidence", run.fit.confidence},
              {"samples", run.samples.size()}};
  return *tof_;
}

}  // namespace llt::engine
