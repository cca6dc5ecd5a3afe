#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include "llt/engine.hpp"
#include "llt/errors.hpp"
#include "llt/units.hpp"

namespace llt::engine {
namespace {

using units::Dim;

struct Alias {
  const char* pointer;
  Dim dim;
};

const std::map<std::string, Alias>& aliases() {
  static const std::map<std::string, Alias> m{
      {"sim_time", {"/sim_time", Dim::time}},
      {"P_science", {"/chambers/science/pressure", Dim::pressure}},
      {"P_loadlock", {"/chambers/loadlock/pressure", Dim::pressure}},
      {"T_loadlock", {"/chambers/loadlock/temperature", Dim::celsius}},
      {"atom_number", {"/ensemble/atom_number", Dim::dimensionless}},
      {"gate_valve", {"/devices/gate_valve", Dim::dimensionless}},
      {"angle_valve", {"/devices/angle_valve", Dim::dimensionless}},
      {"translator", {"/devices/translator/position", Dim::length}},
      {"cavity", {"/devices/cavity", Dim::dimensionless}},
      {"phase", {"/checklist/current", Dim::dimensionless}},
      {"checklist_complete", {"/checklist/complete", Dim::dimensionless}},
      {"violations", {"/violations", Dim::dimensionless}},
  };
  return m;
}

double time_value(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ConfigError(where + ": expected a time such as \"5 min\"");
  try {
    return units::parse(v.get<std::string>(), Dim::time);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

double bound_value(const json& v, Dim d, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ConfigError(where + ": expected a number or a unit string");
  try {
    return units::parse(v.get<std::string>(), d);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok |= it.key() == k;
    if (!ok) throw ConfigError(where + "." + it.key() + ": unknown key");
  }
}

std::string describe(const Assertion& a) {
  std::string s;
  auto num = [](double x) {
    char b[48];
    std::snprintf(b, sizeof b, "%.6g", x);
    return std::string(b);
  };
  if (a.min) s += ">= " + num(*a.min);
  if (a.max) s += std::string(s.empty() ? "" : " and ") + "<= " + num(*a.max);
  if (a.equals) s += std::string(s.empty() ? "" : " and ") + "== " + a.equals->dump();
  if (a.approx) s += std::string(s.empty() ? "" : " and ") + "~= " + num(*a.approx) + " (rel " + num(a.tolerance) + ")";
  return s;
}

AssertionResult evaluate(const Assertion& a, const ordered_json& snap) {
  AssertionResult r;
  r.label = a.label;
  r.at = a.at;
  r.quantity = a.quantity;
  r.expectation = describe(a);
  r.value = resolve_quantity(snap, a.quantity);
  bool ok = true;
  if (a.min || a.max || a.approx) {
    if (!r.value.is_number()) {
      r.passed = false;
      return r;
    }
    const double x = r.value.get<double>();
    if (a.min) ok &= x >= *a.min;
    if (a.max) ok &= x <= *a.max;
    if (a.approx) ok &= std::fabs(x - *a.approx) <= a.tolerance * std::fabs(*a.approx);
  }
  if (a.equals) ok &= r.value == *a.equals;
  r.passed = ok;
  return r;
}

}  // namespace

json resolve_quantity(const ordered_json& snapshot, const std::string& quantity) {
  std::string ptr = quantity;
  if (auto it = aliases().find(quantity); it != aliases().end()) ptr = it->second.pointer;
  if (ptr.empty() || ptr[0] != '/') throw CommandError("unknown_quantity", "unknown quantity '" + quantity + "'");
  try {
    const auto& v = snapshot.at(ordered_json::json_pointer(ptr));
    return json::parse(v.dump());
  } catch (const nlohmann::json::exception&) {
    throw CommandError("unknown_quantity", "no snapshot field at '" + ptr + "'");
  }
}

Scenario load_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected an object");
  only_keys(j, {"name", "description", "steps", "assertions", "end"}, "scenario");
  Scenario sc;
  if (j.contains("name")) sc.name = j["name"].get<std::string>();

  double last = 0.0;
  if (j.contains("steps")) {
    if (!j["steps"].is_array()) throw ConfigError("scenario.steps: expected a list");
    for (std::size_t k = 0; k < j["steps"].size(); ++k) {
      const json& s = j["steps"][k];
      const std::string where = "scenario.steps[" + std::to_string(k) + "]";
      if (!s.is_object()) throw ConfigError(where + ": expected an object");
      only_keys(s, {"at", "after", "phase", "verb", "params", "force", "expect", "note"}, where);
      ScenarioStep st;
      if (s.contains("at") == s.contains("after")) throw ConfigError(where + ": give exactly one of 'at' or 'after'");
      st.at = s.contains("at") ? time_value(s["at"], where + ".at") : last + time_value(s["after"], where + ".after");
      if (!(st.at >= last)) throw ConfigError(where + ": step times must be non-decreasing");
      last = st.at;
      if (s.contains("phase")) st.phase = s["phase"].get<std::string>();
      json cmd = {{"verb", s.value("verb", json())}};
      if (s.contains("params")) cmd["params"] = s["params"];
      if (s.contains("force")) cmd["force"] = s["force"];
      try {
        st.command = parse_command(cmd);
      } catch (const CommandError& e) {
        throw ConfigError(where + ": " + e.what());
      }
      if (s.contains("expect")) {
        const auto e = s["expect"].get<std::string>();
        if (e != "accepted" && e != "rejected") throw ConfigError(where + ".expect: accepted or rejected");
        st.expect_rejection = e == "rejected";
      }
      sc.steps.push_back(std::move(st));
    }
  }

  double end = last;
  if (j.contains("end")) end = std::max(end, time_value(j["end"], "scenario.end"));
  if (j.contains("assertions")) {
    if (!j["assertions"].is_array()) throw ConfigError("scenario.assertions: expected a list");
    for (std::size_t k = 0; k < j["assertions"].size(); ++k) {
      const json& s = j["assertions"][k];
      const std::string where = "scenario.assertions[" + std::to_string(k) + "]";
      if (!s.is_object()) throw ConfigError(where + ": expected an object");
      only_keys(s, {"at", "quantity", "min", "max", "equals", "approx", "tolerance", "label"}, where);
      Assertion a;
      if (!s.contains("quantity") || !s["quantity"].is_string()) throw ConfigError(where + ": missing quantity");
      a.quantity = s["quantity"].get<std::string>();
      Dim d = Dim::dimensionless;
      if (auto it = aliases().find(a.quantity); it != aliases().end()) d = it->second.dim;
      else if (a.quantity.empty() || a.quantity[0] != '/')
        throw ConfigError(where + ".quantity: unknown quantity '" + a.quantity + "'");
      // "end" defers to the scenario end, resolved below.
      a.at = s.contains("at") && s["at"] == "end" ? -1.0 : s.contains("at") ? time_value(s["at"], where + ".at") : -1.0;
      if (s.contains("min")) a.min = bound_value(s["min"], d, where + ".min");
      if (s.contains("max")) a.max = bound_value(s["max"], d, where + ".max");
      if (s.contains("equals")) a.equals = s["equals"];
      if (s.contains("approx")) {
        a.approx = bound_value(s["approx"], d, where + ".approx");
        if (!s.contains("tolerance") || !s["tolerance"].is_number())
          throw ConfigError(where + ": approx needs a relative tolerance");
        a.tolerance = s["tolerance"].get<double>();
      }
      if (!a.min && !a.max && !a.equals && !a.approx) throw ConfigError(where + ": no comparison given");
      a.label = s.value("label", a.quantity);
      if (a.at >= 0.0) end = std::max(end, a.at);
      sc.assertions.push_back(std::move(a));
    }
  }
  sc.end = end;
  for (auto& a : sc.assertions)
    if (a.at < 0.0) a.at = end;
  std::stable_sort(sc.assertions.begin(), sc.assertions.end(),
                   [](const Assertion& x, const Assertion& y) { return x.at < y.at; });
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return load_scenario(doc);
}

bool RunReport::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const AssertionResult& a) { return a.passed; });
}

ordered_json RunReport::to_json() const {
  ordered_json j;
  j["scenario"] = scenario;
  j["passed"] = passed();
  j["sim_time"] = sim_time;
  j["sim_days"] = sim_time / 86400.0;
  j["wall_seconds"] = wall_seconds;
  j["records"] = records;
  j["final"] = {{"P_science", p_science}, {"P_loadlock", p_loadlock}};
  ordered_json ph = ordered_json::array();
  for (const auto& p : phases) {
    ordered_json e;
    e["id"] = std::string(1, p.id);
    e["title"] = p.title;
    e["started"] = p.started ? ordered_json(*p.started) : ordered_json(nullptr);
    e["completed"] = p.completed ? ordered_json(*p.completed) : ordered_json(nullptr);
    e["duration"] = p.started && p.completed ? ordered_json(*p.completed - *p.started) : ordered_json(nullptr);
    ph.push_back(std::move(e));
  }
  j["phases"] = std::move(ph);
  ordered_json as = ordered_json::array();
  for (const auto& a : assertions) {
    ordered_json e;
    e["label"] = a.label;
    e["at"] = a.at;
    e["quantity"] = a.quantity;
    e["value"] = ordered_json::parse(a.value.dump());
    e["expectation"] = a.expectation;
    e["passed"] = a.passed;
    as.push_back(std::move(e));
  }
  j["assertions"] = std::move(as);
  j["final_state"] = final_state;
  return j;
}

RunReport run(const ApparatusConfig& cfg, const Scenario& sc, const RunOptions& opt) {
  if (!(opt.speedup >= 0.0)) throw PreconditionError("speedup must be >= 0");
  const auto wall0 = std::chrono::steady_clock::now();
  Simulation sim(cfg);
  std::optional<TelemetryWriter> writer;
  if (!opt.telemetry_path.empty() || !opt.csv_path.empty()) writer.emplace(opt.telemetry_path, opt.csv_path);

  RunReport rep;
  rep.scenario = sc.name;
  auto drain = [&] {
    for (const auto& r : sim.take_telemetry()) {
      if (writer) writer->write(r);
      if (opt.sink) opt.sink(r);
      ++rep.records;
    }
  };
  auto pace = [&] {
    if (!opt.pace || opt.speedup <= 0.0 || !std::isfinite(opt.speedup)) return;
    const auto due = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                 std::chrono::duration<double>(sim.time() / opt.speedup));
    std::this_thread::sleep_until(due);
  };
  // Pacing points sit on the cadence grid, where the simulation stops
  // anyway, so the speedup never moves an integration boundary.
  auto advance = [&](double t) {
    const double cad = cfg.telemetry_cadence;
    while (sim.time() < t) {
      const double tc = (std::floor(sim.time() / cad + 1e-9) + 1.0) * cad;
      sim.advance_to(std::min(t, tc));
      drain();
      pace();
    }
  };

  const bool paused = opt.speedup == 0.0;
  std::size_t i = 0, k = 0;
  try {
    while (true) {
      const double now = sim.time();
      while (i < sc.steps.size() && sc.steps[i].at <= now) {
        const auto& st = sc.steps[i++];
        CommandOutcome out;
        try {
          out = sim.submit(st.command);
        } catch (const CommandError& e) {
          throw ScenarioAbort(st.phase.empty() ? "-" : st.phase, e.what());
        }
        if (out.accepted == st.expect_rejection)
          throw ScenarioAbort(st.phase.empty() ? "-" : st.phase,
                              out.accepted ? std::string(app::to_string(st.command.verb)) + " accepted, expected rejection"
                                           : out.reason);
      }
      if (k < sc.assertions.size() && sc.assertions[k].at <= now) {
        sim.flush();
        const auto snap = sim.snapshot();
        while (k < sc.assertions.size() && sc.assertions[k].at <= now) rep.assertions.push_back(evaluate(sc.assertions[k++], snap));
      }
      double next = sc.end;
      if (i < sc.steps.size()) next = std::min(next, sc.steps[i].at);
      if (k < sc.assertions.size()) next = std::min(next, sc.assertions[k].at);
      if (paused || (now >= sc.end && i == sc.steps.size() && k == sc.assertions.size())) break;
      advance(next);
    }
  } catch (...) {
    sim.flush();
    drain();
    throw;
  }
  sim.flush();
  drain();

  rep.sim_time = sim.time();
  const auto& ch = sim.apparatus().vacuum().chambers;
  rep.p_science = ch[vac::idx::science].pressure;
  rep.p_loadlock = ch[vac::idx::loadlock].pressure;
  rep.phases.assign(sim.apparatus().checklist().phases.begin(), sim.apparatus().checklist().phases.end());
  rep.final_state = sim.snapshot();
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return rep;
}

}  // namespace llt::engine
