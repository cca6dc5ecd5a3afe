#include <cmath>
#include <set>

#include "llt/engine.hpp"
#include "llt/errors.hpp"
#include "llt/units.hpp"

namespace llt::engine {
namespace {

using app::Verb;
using units::Dim;

[[noreturn]] void malformed(const std::string& what) { throw CommandError("malformed", what); }

// Quantities may be unit strings or bare numbers in the internal unit.
double quantity(const json& v, const char* name, Dim d) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) malformed(std::string(name) + ": expected a number or a unit string");
  try {
    return units::parse(v.get<std::string>(), d);
  } catch (const ConfigError& e) {
    malformed(std::string(name) + ": " + e.what());
  }
}

std::set<std::string> allowed_params(Verb v) {
  switch (v) {
    case Verb::move_translator: return {"target"};
    case Verb::set_bake: return {"setpoint", "on"};
    case Verb::start_ion_pump:
    case Verb::stop_ion_pump: return {"pump"};
    case Verb::set_dispenser: return {"index", "current"};
    case Verb::run_mot: return {"on"};
    default: return {};
  }
}

}  // namespace

app::DeviceCommand parse_command(const json& j) {
  if (!j.is_object()) malformed("command must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "verb" && it.key() != "params" && it.key() != "force")
      throw CommandError("unknown_parameter", "unknown command field '" + it.key() + "'");
  if (!j.contains("verb") || !j["verb"].is_string()) malformed("missing string field 'verb'");
  const auto verb = app::parse_verb(j["verb"].get<std::string>());
  if (!verb) throw CommandError("unknown_verb", "unknown verb '" + j["verb"].get<std::string>() + "'");

  app::DeviceCommand cmd;
  cmd.verb = *verb;
  if (j.contains("force")) {
    if (!j["force"].is_boolean()) malformed("force: expected true or false");
    cmd.force = j["force"].get<bool>();
  }
  static const json empty = json::object();
  const json& p = j.contains("params") ? j["params"] : empty;
  if (!p.is_object()) malformed("params must be an object");
  const auto allowed = allowed_params(cmd.verb);
  for (auto it = p.begin(); it != p.end(); ++it)
    if (!allowed.count(it.key()))
      throw CommandError("unknown_parameter",
                         "verb " + std::string(app::to_string(cmd.verb)) + " takes no parameter '" + it.key() + "'");
  auto need = [&](const char* key) -> const json& {
    if (!p.contains(key))
      malformed("verb " + std::string(app::to_string(cmd.verb)) + " needs parameter '" + key + "'");
    return p[key];
  };
  auto flag = [&](const char* key, bool dflt) {
    if (!p.contains(key)) return dflt;
    if (!p[key].is_boolean()) malformed(std::string(key) + ": expected true or false");
    return p[key].get<bool>();
  };

  switch (cmd.verb) {
    case Verb::move_translator: cmd.target = quantity(need("target"), "target", Dim::length); break;
    case Verb::set_bake:
      cmd.on = flag("on", true);
      if (cmd.on || p.contains("setpoint")) cmd.setpoint = quantity(need("setpoint"), "setpoint", Dim::celsius);
      break;
    case Verb::start_ion_pump:
    case Verb::stop_ion_pump: {
      std::string which = "loadlock";
      if (p.contains("pump")) {
        if (!p["pump"].is_string()) malformed("pump: expected \"science\" or \"loadlock\"");
        which = p["pump"].get<std::string>();
      }
      if (which == "science") cmd.pump = app::IonPump::science;
      else if (which == "loadlock") cmd.pump = app::IonPump::loadlock;
      else throw CommandError("parameter_out_of_range", "pump must be \"science\" or \"loadlock\"");
      break;
    }
    case Verb::set_dispenser: {
      const json& idx = need("index");
      if (!idx.is_number_integer()) malformed("index: expected an integer");
      cmd.index = idx.get<int>();
      cmd.current = quantity(need("current"), "current", Dim::current);
      break;
    }
    case Verb::run_mot: cmd.on = flag("on", true); break;
    default: break;
  }
  if (!std::isfinite(cmd.target) || !std::isfinite(cmd.setpoint) || !std::isfinite(cmd.current))
    throw CommandError("parameter_out_of_range", "parameters must be finite");
  return cmd;
}

json command_to_json(const app::DeviceCommand& cmd) {
  json p = json::object();
  switch (cmd.verb) {
    case Verb::move_translator: p["target"] = units::format(cmd.target, Dim::length); break;
    case Verb::set_bake:
      p["on"] = cmd.on;
      p["setpoint"] = units::format(cmd.setpoint, Dim::celsius);
      break;
    case Verb::start_ion_pump:
    case Verb::stop_ion_pump: p["pump"] = cmd.pump == app::IonPump::science ? "science" : "loadlock"; break;
    case Verb::set_dispenser:
      p["index"] = cmd.index;
      p["current"] = units::format(cmd.current, Dim::current);
      break;
    case Verb::run_mot: p["on"] = cmd.on; break;
    default: break;
  }
  json j = {{"verb", std::string(app::to_string(cmd.verb))}, {"params", p}};
  if (cmd.force) j["force"] = true;
  return j;
}

}  // namespace llt::engine
