#include <cstdio>

#include "llt/engine.hpp"
#include "llt/errors.hpp"

namespace llt::engine {

ordered_json to_json(const TelemetryRecord& r) {
  const auto& c = r.contamination;
  const auto& d = r.devices;
  ordered_json cont;
  cont["science_walls"] = c.science_walls;
  cont["science_cavity"] = c.science_cavity ? ordered_json(*c.science_cavity) : ordered_json(nullptr);
  cont["loadlock_walls"] = c.loadlock_walls;
  cont["loadlock_cavity"] = c.loadlock_cavity ? ordered_json(*c.loadlock_cavity) : ordered_json(nullptr);
  ordered_json dev;
  dev["gate_valve"] = d.gate_valve;
  dev["angle_valve"] = d.angle_valve;
  dev["flanges_open"] = d.flanges_open;
  dev["translator"] = d.translator;
  dev["turbo"] = d.turbo;
  dev["ion_science"] = d.ion_science;
  dev["ion_loadlock"] = d.ion_loadlock;
  dev["bake_on"] = d.bake_on;
  dev["bake_setpoint"] = d.bake_setpoint;
  dev["cavity"] = d.cavity;
  dev["mot_on"] = d.mot_on;
  ordered_json j;
  j["sim_time"] = r.sim_time;
  j["P_science"] = r.p_science;
  j["P_loadlock"] = r.p_loadlock;
  j["T_loadlock"] = r.t_loadlock;
  j["contamination"] = std::move(cont);
  j["devices"] = std::move(dev);
  j["atom_number"] = r.atom_number;
  j["events"] = r.events;
  return j;
}

TelemetryRecord record_from_json(const json& j) {
  TelemetryRecord r;
  r.sim_time = j.at("sim_time").get<double>();
  r.p_science = j.at("P_science").get<double>();
  r.p_loadlock = j.at("P_loadlock").get<double>();
  r.t_loadlock = j.at("T_loadlock").get<double>();
  const auto& c = j.at("contamination");
  r.contamination.science_walls = c.at("science_walls").get<double>();
  r.contamination.loadlock_walls = c.at("loadlock_walls").get<double>();
  if (!c.at("science_cavity").is_null()) r.contamination.science_cavity = c["science_cavity"].get<double>();
  if (!c.at("loadlock_cavity").is_null()) r.contamination.loadlock_cavity = c["loadlock_cavity"].get<double>();
  const auto& d = j.at("devices");
  r.devices.gate_valve = d.at("gate_valve").get<std::string>();
  r.devices.angle_valve = d.at("angle_valve").get<std::string>();
  r.devices.flanges_open = d.at("flanges_open").get<bool>();
  r.devices.translator = d.at("translator").get<double>();
  r.devices.turbo = d.at("turbo").get<std::string>();
  r.devices.ion_science = d.at("ion_science").get<std::string>();
  r.devices.ion_loadlock = d.at("ion_loadlock").get<std::string>();
  r.devices.bake_on = d.at("bake_on").get<bool>();
  r.devices.bake_setpoint = d.at("bake_setpoint").get<double>();
  r.devices.cavity = d.at("cavity").get<std::string>();
  r.devices.mot_on = d.at("mot_on").get<bool>();
  r.atom_number = j.at("atom_number").get<double>();
  r.events = j.at("events").get<std::vector<std::string>>();
  return r;
}

std::string to_jsonl(const TelemetryRecord& r) { return to_json(r).dump(); }

std::string csv_header() { return "sim_time_s,P_science_torr,P_loadlock_torr,T_loadlock_degC"; }

std::string to_csv(const TelemetryRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.3f,%.6e,%.6e,%.4f", r.sim_time, r.p_science, r.p_loadlock, r.t_loadlock);
  return buf;
}

TelemetryWriter::TelemetryWriter(const std::string& jsonl_path, const std::string& csv_path) {
  if (!jsonl_path.empty()) {
    jsonl_ = std::fopen(jsonl_path.c_str(), "w");
    if (!jsonl_) throw Error("output_unwritable", "cannot write telemetry to " + jsonl_path);
  }
  if (!csv_path.empty()) {
    csv_ = std::fopen(csv_path.c_str(), "w");
    if (!csv_) {
      close();
      throw Error("output_unwritable", "cannot write telemetry to " + csv_path);
    }
    std::fprintf(csv_, "%s\n", csv_header().c_str());
  }
}

TelemetryWriter::~TelemetryWriter() { close(); }

void TelemetryWriter::write(const TelemetryRecord& r) {
  if (jsonl_) std::fprintf(jsonl_, "%s\n", to_jsonl(r).c_str());
  if (csv_) std::fprintf(csv_, "%s\n", to_csv(r).c_str());
}

void TelemetryWriter::close() {
  if (jsonl_) std::fclose(jsonl_);
  if (csv_) std::fclose(csv_);
  jsonl_ = csv_ = nullptr;
}

}  // namespace llt::engine
