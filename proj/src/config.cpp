#include "llt/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "llt/errors.hpp"
#include "llt/units.hpp"

namespace llt::engine {
namespace {

using nlohmann::json;
using units::Dim;

// Typed view of one JSON object that remembers which keys were read, so
// finish() can reject anything unrecognized.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void quantity(const char* key, double& out, Dim d) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string()) fail(key, "expected a unit-suffixed string such as \"" + units::format(out, d) + "\"");
    try {
      out = units::parse(v->get<std::string>(), d);
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
  }

  void vec3(const char* key, Vec3& out) {
    const json* v = take(key);
    if (!v) return;
    out = parse_vec3(*v, at(key));
  }

  void number(const char* key, double& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number()) fail(key, "expected a number");
    out = v->get<double>();
  }

  void integer(const char* key, int& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_integer()) fail(key, "expected an integer");
    out = v->get<int>();
  }

  void seed(const char* key, std::uint64_t& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
      fail(key, "expected a non-negative integer");
    out = v->get<std::uint64_t>();
  }

  void boolean(const char* key, bool& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) fail(key, "expected true or false");
    out = v->get<bool>();
  }

  std::string choice(const char* key, std::string current, std::initializer_list<const char*> allowed) {
    const json* v = take(key);
    if (!v) return current;
    if (!v->is_string()) fail(key, "expected a string");
    const auto s = v->get<std::string>();
    for (const char* a : allowed)
      if (s == a) return s;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail(key, "expected one of " + list);
    return current;
  }

  const json* raw(const char* key) { return take(key); }

  // Missing children read as empty objects, keeping every field optional.
  Obj child(const char* key) {
    static const json empty = json::object();
    const json* v = take(key);
    return Obj(v ? *v : empty, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown key");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw ConfigError((key.empty() ? (path_.empty() ? std::string("<root>") : path_) : at(key)) + ": " + why);
  }

  static Vec3 parse_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z] lengths");
    Vec3 out;
    double* dst[3] = {&out.x, &out.y, &out.z};
    for (int k = 0; k < 3; ++k) {
      if (!v[k].is_string()) throw ConfigError(where + ": coordinates need units, e.g. \"2 in\"");
      try {
        *dst[k] = units::parse(v[k].get<std::string>(), Dim::length);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
    return out;
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    return &*it;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Shortest of %.15g..%.17g that reads back to the same double.
std::string q(double v, const char* unit) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return std::string(buf) + " " + unit;
}

json v3(const Vec3& v) { return json::array({q(v.x, "m"), q(v.y, "m"), q(v.z, "m")}); }

void read_geometry(Obj o, phys::ApparatusGeometry& g) {
  o.vec3("chamber_center", g.chamber_center);
  o.vec3("mot_position", g.mot_position);
  o.quantity("transport_distance", g.transport_distance, Dim::length);
  o.quantity("translator_throw", g.translator_throw, Dim::length);
  {
    Obj b = o.child("cavity_envelope");
    b.vec3("center", g.cavity_envelope.center);
    b.vec3("size", g.cavity_envelope.size);
    b.finish();
  }
  {
    Obj r = o.child("carrier_plate");
    r.vec3("center", g.carrier_plate.center);
    r.vec3("half_u", g.carrier_plate.half_u);
    r.vec3("half_v", g.carrier_plate.half_v);
    r.finish();
  }
  if (const json* d = o.raw("dispenser_positions")) {
    if (!d->is_array()) o.fail("dispenser_positions", "expected a list of [x, y, z]");
    g.dispenser_positions.clear();
    for (std::size_t k = 0; k < d->size(); ++k)
      g.dispenser_positions.push_back(Obj::parse_vec3((*d)[k], o.at("dispenser_positions") + "[" + std::to_string(k) + "]"));
  }
  o.integer("feedthrough_pin_count", g.feedthrough_pin_count);
  o.finish();
}

void read_coils(Obj o, mag::CoilPair& c) {
  o.quantity("mean_radius", c.mean_radius, Dim::length);
  o.quantity("half_separation", c.half_separation, Dim::length);
  o.integer("layers", c.layers);
  o.integer("turns_per_layer", c.turns_per_layer);
  o.quantity("layer_radial_pitch", c.layer_radial_pitch, Dim::length);
  o.quantity("turn_axial_pitch", c.turn_axial_pitch, Dim::length);
  o.quantity("current", c.current, Dim::current);
  o.boolean("anti_helmholtz", c.anti_helmholtz);
  c.winding = o.choice("winding", c.winding == mag::Winding::collapsed ? "collapsed" : "distributed",
                       {"distributed", "collapsed"}) == "collapsed"
                  ? mag::Winding::collapsed
                  : mag::Winding::distributed;
  o.vec3("center", c.center);
  o.finish();
}

void read_beam(Obj o, conveyor::GaussianBeam& b) {
  o.quantity("power", b.power, Dim::power);
  o.quantity("waist", b.waist, Dim::length);
  o.quantity("wavelength", b.wavelength, Dim::length);
  o.quantity("focus_position", b.focus_position, Dim::length);
  o.finish();
}

void read_lattice(Obj o, conveyor::LatticeConfig& l) {
  read_beam(o.child("beam_up"), l.beam_up);
  read_beam(o.child("beam_down"), l.beam_down);
  o.quantity("detuning_offset", l.detuning_offset, Dim::frequency);
  if (const json* d = o.raw("lattice_depth_override")) {
    if (d->is_null()) {
      l.lattice_depth_override.reset();
    } else if (d->is_string()) {
      try {
        l.lattice_depth_override = units::parse(d->get<std::string>(), Dim::energy);
      } catch (const ConfigError& e) {
        o.fail("lattice_depth_override", e.what());
      }
    } else {
      o.fail("lattice_depth_override", "expected an energy such as \"38 uK\" or null");
    }
  }
  o.finish();
}

void read_transport(Obj o, TransportSettings& t) {
  o.quantity("distance", t.distance, Dim::length);
  o.quantity("v_max", t.v_max, Dim::velocity);
  o.quantity("a_max", t.a_max, Dim::acceleration);
  o.quantity("temperature", t.temperature, Dim::kelvin);
  o.integer("atoms", t.atoms);
  o.finish();
}

void read_chamber(Obj o, vac::Chamber& ch) {
  o.quantity("volume", ch.volume, Dim::volume);
  o.quantity("wall_area", ch.walls.area, Dim::area);
  o.number("wall_contamination", ch.walls.contamination);
  o.quantity("temperature", ch.temperature, Dim::celsius);
  ch.temperature_target = ch.temperature;
  o.quantity("pressure", ch.pressure, Dim::pressure);
  o.finish();
}

vac::PumpState read_state(Obj& o, vac::PumpState s) {
  return o.choice("state", s == vac::PumpState::on ? "on" : "off", {"on", "off"}) == "on" ? vac::PumpState::on
                                                                                        : vac::PumpState::off;
}

void read_pump(Obj o, vac::Pump& p) {
  o.quantity("nominal_speed", p.nominal_speed, Dim::pump_speed);
  o.quantity("port_conductance", p.port_conductance, Dim::pump_speed);
  o.quantity("derate_pressure", p.derate_pressure, Dim::pressure);
  o.quantity("base_pressure", p.base_pressure, Dim::pressure);
  o.quantity("max_start_pressure", p.max_start_pressure, Dim::pressure);
  o.quantity("trip_pressure", p.trip_pressure, Dim::pressure);
  o.quantity("trip_delay", p.trip_delay, Dim::time);
  p.state = read_state(o, p.state);
  o.finish();
}

void read_valve(Obj o, vac::Valve& v) {
  o.quantity("conductance", v.conductance, Dim::pump_speed);
  bool open = v.fraction > 0.0;
  o.boolean("open", open);
  v.fraction = open ? 1.0 : 0.0;
  o.finish();
}

void read_vacuum(Obj o, ApparatusConfig& cfg) {
  auto& net = cfg.vacuum;
  {
    Obj c = o.child("chambers");
    read_chamber(c.child("science"), net.chambers[vac::idx::science]);
    read_chamber(c.child("loadlock"), net.chambers[vac::idx::loadlock]);
    c.finish();
  }
  cfg.settle_initial_pressures =
      o.choice("initial_pressures", cfg.settle_initial_pressures ? "equilibrium" : "configured",
               {"equilibrium", "configured"}) == "equilibrium";
  {
    Obj c = o.child("cavity");
    auto& sci = net.chambers[vac::idx::science];
    auto& ll = net.chambers[vac::idx::loadlock];
    vac::Surface cav{"cavity", cfg.apparatus.cavity_area, 0.0};
    std::string where = "none";
    if (!sci.payloads.empty()) {
      cav = sci.payloads.front();
      where = "science";
    } else if (!ll.payloads.empty()) {
      cav = ll.payloads.front();
      where = "loadlock";
    }
    c.quantity("area", cav.area, Dim::area);
    c.number("contamination", cav.contamination);
    where = c.choice("location", where, {"science", "loadlock", "none"});
    c.finish();
    cfg.apparatus.cavity_area = cav.area;
    sci.payloads.clear();
    ll.payloads.clear();
    if (where == "science") sci.payloads.push_back(cav);
    if (where == "loadlock") ll.payloads.push_back(cav);
  }
  {
    Obj p = o.child("pumps");
    read_pump(p.child("science_ion"), net.pumps[vac::idx::science_ion]);
    read_pump(p.child("loadlock_ion"), net.pumps[vac::idx::loadlock_ion]);
    read_pump(p.child("turbo"), net.pumps[vac::idx::turbo]);
    p.finish();
  }
  {
    Obj v = o.child("valves");
    read_valve(v.child("gate"), net.valves[vac::idx::gate_valve]);
    read_valve(v.child("angle"), net.valves[vac::idx::angle_valve]);
    {
      Obj vl = v.child("vent_line");
      vl.quantity("conductance", net.paths[vac::idx::vent_path].conductance, Dim::pump_speed);
      vl.finish();
    }
    v.finish();
  }
  {
    Obj g = o.child("outgassing");
    auto& m = net.outgassing;
    g.quantity("q_clean", m.q_clean, Dim::outgassing);
    g.quantity("q_dirty", m.q_dirty, Dim::outgassing);
    g.quantity("bake_time_const_ref", m.bake_time_const_ref, Dim::time);
    g.quantity("bake_ref_temp", m.bake_ref_temp, Dim::celsius);
    g.quantity("temp_doubling", m.temp_doubling, Dim::celsius);  // a difference, same scale
    g.quantity("ref_temp", m.ref_temp, Dim::celsius);
    g.finish();
  }
  {
    Obj i = o.child("integrator");
    i.number("rtol", net.rtol);
    i.number("atol", net.atol);
    i.quantity("max_step", net.max_step, Dim::time);
    i.quantity("monitor_interval", net.monitor_interval, Dim::time);
    i.finish();
  }
  o.finish();
}

void read_interlocks(Obj o, app::Thresholds& t) {
  o.quantity("gate_max_pressure", t.gate_max_pressure, Dim::pressure);
  o.quantity("gate_max_difference", t.gate_max_difference, Dim::pressure);
  o.quantity("gate_max_temperature", t.gate_max_temperature, Dim::celsius);
  o.quantity("handoff_position", t.handoff_position, Dim::length);
  o.quantity("flange_min_pressure", t.flange_min_pressure, Dim::pressure);
  o.quantity("bake_limit", t.bake_limit, Dim::celsius);
  o.quantity("mot_max_pressure", t.mot_max_pressure, Dim::pressure);
  o.quantity("bake_complete_temperature", t.bake_complete_temperature, Dim::celsius);
  o.finish();
}

void read_actuation(Obj o, app::Actuation& a) {
  o.quantity("gate_time", a.gate_time, Dim::time);
  o.quantity("gate_tick", a.gate_tick, Dim::time);
  o.quantity("angle_time", a.angle_time, Dim::time);
  o.quantity("translator_speed", a.translator_speed, Dim::velocity);
  o.quantity("turbo_spinup", a.turbo_spinup, Dim::time);
  o.quantity("bake_ramp", a.bake_ramp, Dim::celsius_rate);
  o.quantity("ambient", a.ambient, Dim::celsius);
  o.finish();
}

void read_ensemble(Obj o, app::EnsembleSource& e) {
  o.quantity("loading_rate", e.loading_rate, Dim::loading_rate);
  o.quantity("dispenser_threshold", e.dispenser_threshold, Dim::current);
  o.quantity("loss_constant", e.loss_constant, Dim::loss_constant);
  o.quantity("max_current", e.max_current, Dim::current);
  o.finish();
}

void read_tof(Obj o, TofSettings& t) {
  o.quantity("temperature", t.cloud.temperature, Dim::kelvin);
  o.number("atom_number", t.cloud.atom_number);
  if (const json* s = o.raw("initial_sigma")) {
    if (!s->is_array() || s->size() != 2 || !(*s)[0].is_string() || !(*s)[1].is_string())
      o.fail("initial_sigma", "expected [sigma_x, sigma_y] lengths");
    try {
      t.cloud.initial_sigma = {units::parse((*s)[0].get<std::string>(), Dim::length),
                               units::parse((*s)[1].get<std::string>(), Dim::length)};
    } catch (const ConfigError& e) {
      o.fail("initial_sigma", e.what());
    }
  }
  o.quantity("pixel_pitch", t.render.pixel_pitch, Dim::length);
  o.number("peak_counts", t.render.peak_counts);
  o.number("reference_atoms", t.render.reference_atoms);
  o.number("grid_sigmas", t.render.grid_sigmas);
  o.boolean("noise", t.render.noise);
  if (const json* ts = o.raw("times")) {
    if (!ts->is_array()) o.fail("times", "expected a list of times");
    t.times.clear();
    for (const auto& e : *ts) {
      if (!e.is_string()) o.fail("times", "times need units, e.g. \"5 ms\"");
      try {
        t.times.push_back(units::parse(e.get<std::string>(), Dim::time));
      } catch (const ConfigError& ex) {
        o.fail("times", ex.what());
      }
    }
  }
  o.finish();
}

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate_all(ApparatusConfig& cfg) {
  try {
    phys::validate(cfg.geometry);
    mag::validate(cfg.coils);
    conveyor::validate(cfg.lattice);
    vac::validate(cfg.vacuum);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  check(cfg.transport.distance > 0 && cfg.transport.v_max > 0 && cfg.transport.a_max > 0,
        "transport: distance, v_max and a_max must be > 0");
  check(cfg.transport.temperature > 0, "transport.temperature must be > 0");
  check(cfg.transport.atoms > 0, "transport.atoms must be > 0");
  check(cfg.tof.cloud.temperature > 0 && cfg.tof.cloud.initial_sigma.x > 0 && cfg.tof.cloud.initial_sigma.y > 0,
        "tof: temperature and initial_sigma must be > 0");
  check(cfg.tof.times.size() >= 3, "tof.times needs at least 3 entries");
  check(cfg.tof.render.pixel_pitch > 0 && cfg.tof.render.peak_counts > 0, "tof: pixel_pitch and peak_counts must be > 0");
  check(cfg.telemetry_cadence > 0, "telemetry.cadence must be > 0");
  check(cfg.stream_rate > 0, "service.stream_rate must be > 0");
  check(cfg.service_speedup >= 0, "service.speedup must be >= 0");
  const auto& a = cfg.apparatus.actuation;
  check(a.gate_time > 0 && a.gate_tick > 0 && a.gate_tick <= a.gate_time && a.angle_time > 0 &&
            a.translator_speed > 0 && a.turbo_spinup >= 0 && a.bake_ramp > 0,
        "actuation: durations and rates must be positive");
  check(cfg.apparatus.thresholds.bake_limit > 0, "interlocks.bake_limit must be > 0");
  check(cfg.apparatus.ensemble.loss_constant > 0, "ensemble.loss_constant must be > 0");
  cfg.apparatus.translator_throw = cfg.geometry.translator_throw;
}

}  // namespace

ApparatusConfig default_config() {
  ApparatusConfig cfg;
  validate_all(cfg);
  return cfg;
}

ApparatusConfig load_config(const json& doc) {
  ApparatusConfig cfg;
  Obj root(doc, "");
  read_geometry(root.child("geometry"), cfg.geometry);
  read_coils(root.child("coils"), cfg.coils);
  read_lattice(root.child("lattice"), cfg.lattice);
  read_transport(root.child("transport"), cfg.transport);
  read_vacuum(root.child("vacuum"), cfg);
  read_interlocks(root.child("interlocks"), cfg.apparatus.thresholds);
  read_actuation(root.child("actuation"), cfg.apparatus.actuation);
  read_ensemble(root.child("ensemble"), cfg.apparatus.ensemble);
  read_tof(root.child("tof"), cfg.tof);
  {
    Obj t = root.child("telemetry");
    t.quantity("cadence", cfg.telemetry_cadence, Dim::time);
    t.finish();
  }
  {
    Obj s = root.child("service");
    s.quantity("stream_rate", cfg.stream_rate, Dim::frequency);
    s.number("speedup", cfg.service_speedup);
    s.finish();
  }
  {
    Obj s = root.child("seeds");
    s.seed("gauge", cfg.seeds.gauge);
    s.seed("transport", cfg.seeds.transport);
    s.seed("tof", cfg.seeds.tof);
    s.finish();
  }
  if (const json* c = root.raw("$schema"); c && !c->is_string()) root.fail("$schema", "expected a string");
  if (const json* c = root.raw("description"); c && !c->is_string()) root.fail("description", "expected a string");
  root.finish();
  validate_all(cfg);
  return cfg;
}

ApparatusConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return load_config(doc);
}

json to_json(const ApparatusConfig& cfg) {
  const auto& g = cfg.geometry;
  json geometry = {
      {"chamber_center", v3(g.chamber_center)},
      {"mot_position", v3(g.mot_position)},
      {"transport_distance", q(g.transport_distance, "m")},
      {"translator_throw", q(g.translator_throw, "m")},
      {"cavity_envelope", {{"center", v3(g.cavity_envelope.center)}, {"size", v3(g.cavity_envelope.size)}}},
      {"carrier_plate",
       {{"center", v3(g.carrier_plate.center)}, {"half_u", v3(g.carrier_plate.half_u)}, {"half_v", v3(g.carrier_plate.half_v)}}},
      {"dispenser_positions", json::array()},
      {"feedthrough_pin_count", g.feedthrough_pin_count},
  };
  for (const auto& d : g.dispenser_positions) geometry["dispenser_positions"].push_back(v3(d));

  const auto& c = cfg.coils;
  json coils = {
      {"mean_radius", q(c.mean_radius, "m")},
      {"half_separation", q(c.half_separation, "m")},
      {"layers", c.layers},
      {"turns_per_layer", c.turns_per_layer},
      {"layer_radial_pitch", q(c.layer_radial_pitch, "m")},
      {"turn_axial_pitch", q(c.turn_axial_pitch, "m")},
      {"current", q(c.current, "A")},
      {"anti_helmholtz", c.anti_helmholtz},
      {"winding", c.winding == mag::Winding::collapsed ? "collapsed" : "distributed"},
      {"center", v3(c.center)},
  };

  auto beam = [](const conveyor::GaussianBeam& b) {
    return json{{"power", q(b.power, "W")},
                {"waist", q(b.waist, "m")},
                {"wavelength", q(b.wavelength, "m")},
                {"focus_position", q(b.focus_position, "m")}};
  };
  json lattice = {{"beam_up", beam(cfg.lattice.beam_up)},
                  {"beam_down", beam(cfg.lattice.beam_down)},
                  {"detuning_offset", q(cfg.lattice.detuning_offset, "Hz")},
                  {"lattice_depth_override", nullptr}};
  if (cfg.lattice.lattice_depth_override) lattice["lattice_depth_override"] = q(*cfg.lattice.lattice_depth_override, "J");

  const auto& t = cfg.transport;
  json transport = {{"distance", q(t.distance, "m")},
                    {"v_max", q(t.v_max, "m/s")},
                    {"a_max", q(t.a_max, "m/s2")},
                    {"temperature", q(t.temperature, "K")},
                    {"atoms", t.atoms}};

  const auto& net = cfg.vacuum;
  auto chamber = [](const vac::Chamber& ch) {
    return json{{"volume", q(ch.volume, "L")},
                {"wall_area", q(ch.walls.area, "cm2")},
                {"wall_contamination", ch.walls.contamination},
                {"temperature", q(ch.temperature, "degC")},
                {"pressure", q(ch.pressure, "Torr")}};
  };
  auto pump = [](const vac::Pump& p) {
    json j = {{"nominal_speed", q(p.nominal_speed, "L/s")},
              {"port_conductance", q(p.port_conductance, "L/s")},
              {"derate_pressure", q(p.derate_pressure, "Torr")},
              {"base_pressure", q(p.base_pressure, "Torr")},
              {"trip_delay", q(p.trip_delay, "s")},
              {"state", p.state == vac::PumpState::on ? "on" : "off"}};
    if (std::isfinite(p.max_start_pressure)) j["max_start_pressure"] = q(p.max_start_pressure, "Torr");
    if (std::isfinite(p.trip_pressure)) j["trip_pressure"] = q(p.trip_pressure, "Torr");
    return j;
  };
  const auto& sci = net.chambers[vac::idx::science];
  const auto& ll = net.chambers[vac::idx::loadlock];
  json cavity = {{"area", q(cfg.apparatus.cavity_area, "cm2")}, {"contamination", 0.0}, {"location", "none"}};
  if (!sci.payloads.empty()) {
    cavity["contamination"] = sci.payloads.front().contamination;
    cavity["location"] = "science";
  } else if (!ll.payloads.empty()) {
    cavity["contamination"] = ll.payloads.front().contamination;
    cavity["location"] = "loadlock";
  }
  const auto& m = net.outgassing;
  json vacuum = {
      {"chambers", {{"science", chamber(sci)}, {"loadlock", chamber(ll)}}},
      {"initial_pressures", cfg.settle_initial_pressures ? "equilibrium" : "configured"},
      {"cavity", cavity},
      {"pumps",
       {{"science_ion", pump(net.pumps[vac::idx::science_ion])},
        {"loadlock_ion", pump(net.pumps[vac::idx::loadlock_ion])},
        {"turbo", pump(net.pumps[vac::idx::turbo])}}},
      {"valves",
       {{"gate", {{"conductance", q(net.valves[vac::idx::gate_valve].conductance, "L/s")},
                  {"open", net.valves[vac::idx::gate_valve].fraction > 0.0}}},
        {"angle", {{"conductance", q(net.valves[vac::idx::angle_valve].conductance, "L/s")},
                   {"open", net.valves[vac::idx::angle_valve].fraction > 0.0}}},
        {"vent_line", {{"conductance", q(net.paths[vac::idx::vent_path].conductance, "L/s")}}}}},
      {"outgassing",
       {{"q_clean", q(m.q_clean, "Torr*L/(s*cm2)")},
        {"q_dirty", q(m.q_dirty, "Torr*L/(s*cm2)")},
        {"bake_time_const_ref", q(m.bake_time_const_ref, "s")},
        {"bake_ref_temp", q(m.bake_ref_temp, "degC")},
        {"temp_doubling", q(m.temp_doubling, "degC")},
        {"ref_temp", q(m.ref_temp, "degC")}}},
      {"integrator",
       {{"rtol", net.rtol}, {"atol", net.atol}, {"max_step", q(net.max_step, "s")},
        {"monitor_interval", q(net.monitor_interval, "s")}}},
  };

  const auto& th = cfg.apparatus.thresholds;
  json interlocks = {{"gate_max_pressure", q(th.gate_max_pressure, "Torr")},
                     {"gate_max_difference", q(th.gate_max_difference, "Torr")},
                     {"gate_max_temperature", q(th.gate_max_temperature, "degC")},
                     {"handoff_position", q(th.handoff_position, "m")},
                     {"flange_min_pressure", q(th.flange_min_pressure, "Torr")},
                     {"bake_limit", q(th.bake_limit, "degC")},
                     {"mot_max_pressure", q(th.mot_max_pressure, "Torr")},
                     {"bake_complete_temperature", q(th.bake_complete_temperature, "degC")}};
  const auto& a = cfg.apparatus.actuation;
  json actuation = {{"gate_time", q(a.gate_time, "s")},
                    {"gate_tick", q(a.gate_tick, "s")},
                    {"angle_time", q(a.angle_time, "s")},
                    {"translator_speed", q(a.translator_speed, "m/s")},
                    {"turbo_spinup", q(a.turbo_spinup, "s")},
                    {"bake_ramp", q(a.bake_ramp, "degC/s")},
                    {"ambient", q(a.ambient, "degC")}};
  const auto& e = cfg.apparatus.ensemble;
  json ensemble = {{"loading_rate", q(e.loading_rate, "atoms/(s*A)")},
                   {"dispenser_threshold", q(e.dispenser_threshold, "A")},
                   {"loss_constant", q(e.loss_constant, "Torr*s")},
                   {"max_current", q(e.max_current, "A")}};
  const auto& tf = cfg.tof;
  json tof = {{"temperature", q(tf.cloud.temperature, "K")},
              {"atom_number", tf.cloud.atom_number},
              {"initial_sigma", json::array({q(tf.cloud.initial_sigma.x, "m"), q(tf.cloud.initial_sigma.y, "m")})},
              {"pixel_pitch", q(tf.render.pixel_pitch, "m")},
              {"peak_counts", tf.render.peak_counts},
              {"reference_atoms", tf.render.reference_atoms},
              {"grid_sigmas", tf.render.grid_sigmas},
              {"noise", tf.render.noise},
              {"times", json::array()}};
  for (double x : tf.times) tof["times"].push_back(q(x, "s"));

  return json{{"geometry", geometry},
              {"coils", coils},
              {"lattice", lattice},
              {"transport", transport},
              {"vacuum", vacuum},
              {"interlocks", interlocks},
              {"actuation", actuation},
              {"ensemble", ensemble},
              {"tof", tof},
              {"telemetry", {{"cadence", q(cfg.telemetry_cadence, "s")}}},
              {"service", {{"stream_rate", q(cfg.stream_rate, "Hz")}, {"speedup", cfg.service_speedup}}},
              {"seeds", {{"gauge", cfg.seeds.gauge}, {"transport", cfg.seeds.transport}, {"tof", cfg.seeds.tof}}}};
}

}  // namespace llt::engine
