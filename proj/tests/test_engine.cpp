#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "llt/config.hpp"
#include "llt/engine.hpp"
#include "llt/errors.hpp"

using namespace llt;
using namespace llt::engine;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    load_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string command_kind(const json& j) {
  try {
    parse_command(j);
  } catch (const CommandError& e) {
    return e.kind();
  }
  return "";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("llt_engine_" + name)).string();
}

// First two phases of the cycle, short enough to pace at 100x.
json scenario_with_end(double end) {
  json j = json::parse(R"({
    "name": "isolate",
    "steps": [
      {"phase": "a", "at": "0 s", "verb": "move_translator", "params": {"target": "0 m"}},
      {"phase": "a", "at": "310 s", "verb": "close_gate_valve"},
      {"phase": "b", "at": "320 s", "verb": "stop_ion_pump", "params": {"pump": "loadlock"}},
      {"phase": "b", "after": "1 s", "verb": "open_angle_valve"}
    ],
    "assertions": [
      {"at": "316 s", "quantity": "phase", "equals": "b"},
      {"at": "end", "quantity": "P_science", "max": "1e-9 Torr"}
    ]
  })");
  j["end"] = end;
  return j;
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  const auto cfg = default_config();
  const json a = to_json(cfg);
  const json b = to_json(load_config(a));
  CHECK(a == b);
  CHECK(a.dump() == b.dump());

  const json file = json::parse(slurp(LLT_SOURCE_DIR "/config/default.json"));
  CHECK(to_json(load_config(file)) == a);
  CHECK(to_json(load_config_file(LLT_SOURCE_DIR "/config/default.json")) == a);
}

TEST_CASE("partial config documents fill in defaults") {
  const auto cfg = load_config(json::parse(R"({"coils": {"current": "1500 mA"}})"));
  CHECK(cfg.coils.current == doctest::Approx(1.5));
  CHECK(cfg.transport.distance == doctest::Approx(0.1016));
}

TEST_CASE("config errors name the offending path") {
  CHECK(config_error(json::parse(R"({"coils": {"curent": "3 A"}})")).find("coils.curent") != std::string::npos);
  CHECK(config_error(json::parse(R"({"colis": {}})")).find("colis") != std::string::npos);
  CHECK(config_error(json::parse(R"({"coils": {"current": "3 Torr"}})")).find("coils.current") != std::string::npos);
  CHECK(config_error(json::parse(R"({"coils": {"current": "three amps"}})")).find("coils.current") !=
        std::string::npos);
  CHECK(config_error(json::parse(R"({"coils": {"layers": "four"}})")).find("coils.layers") != std::string::npos);
  CHECK_FALSE(config_error(json::parse(R"({"transport": {"atoms": 0}})")).empty());
  CHECK_FALSE(config_error(json::parse("[1, 2]")).empty());
  CHECK_THROWS_AS(load_config_file("/nonexistent/llt.json"), ConfigError);
}

TEST_CASE("command parsing classifies failures") {
  CHECK(command_kind(json::parse("42")) == "malformed");
  CHECK(command_kind(json::parse(R"({"params": {}})")) == "malformed");
  CHECK(command_kind(json::parse(R"({"verb": "open_sesame"})")) == "unknown_verb");
  CHECK(command_kind(json::parse(R"({"verb": "close_gate_valve", "extra": 1})")) == "unknown_parameter");
  CHECK(command_kind(json::parse(R"({"verb": "close_gate_valve", "params": {"speed": 1}})")) ==
        "unknown_parameter");
  CHECK(command_kind(json::parse(R"({"verb": "move_translator"})")) == "malformed");
  CHECK(command_kind(json::parse(R"({"verb": "move_translator", "params": {"target": "1 s"}})")) == "malformed");
  CHECK(command_kind(json::parse(R"({"verb": "start_ion_pump", "params": {"pump": "turbo"}})")) ==
        "parameter_out_of_range");
  CHECK(command_kind(json::parse(R"({"verb": "set_dispenser", "params": {"index": 1.5, "current": "3 A"}})")) ==
        "malformed");
  CHECK(command_kind(json::parse(R"({"verb": "close_gate_valve", "force": "yes"})")) == "malformed");
}

TEST_CASE("commands round-trip through JSON") {
  const char* docs[] = {
      R"({"verb": "move_translator", "params": {"target": "1.2 m"}})",
      R"({"verb": "set_bake", "params": {"setpoint": "110 degC"}})",
      R"({"verb": "set_bake", "params": {"on": false}})",
      R"({"verb": "stop_ion_pump", "params": {"pump": "science"}, "force": true})",
      R"({"verb": "set_dispenser", "params": {"index": 2, "current": "4 A"}})",
      R"({"verb": "run_mot", "params": {"on": false}})",
      R"({"verb": "open_gate_valve"})",
  };
  for (const char* d : docs) {
    CAPTURE(d);
    const auto a = parse_command(json::parse(d));
    const auto b = parse_command(command_to_json(a));
    CHECK(b.verb == a.verb);
    CHECK(b.force == a.force);
    CHECK(b.pump == a.pump);
    CHECK(b.setpoint == doctest::Approx(a.setpoint));
    CHECK(b.on == a.on);
    CHECK(b.target == doctest::Approx(a.target));
    CHECK(b.index == a.index);
    CHECK(b.current == doctest::Approx(a.current));
  }
}

TEST_CASE("telemetry record layout and round trip") {
  Simulation sim(default_config());
  sim.submit(parse_command(json::parse(R"({"verb": "set_dispenser", "params": {"index": 0, "current": "4 A"}})")));
  sim.flush();
  auto recs = sim.take_telemetry();
  REQUIRE(recs.size() == 1);
  const auto& r = recs[0];
  CHECK(r.events == std::vector<std::string>{"accepted:set_dispenser"});

  const auto j = to_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"sim_time", "P_science", "P_loadlock", "T_loadlock", "contamination",
                                         "devices", "atom_number", "events"});
  CHECK(j["P_science"].get<double>() == doctest::Approx(3e-10).epsilon(0.01));
  CHECK(j["contamination"]["loadlock_cavity"].is_null());
  CHECK(j["contamination"]["science_cavity"].is_number());

  const auto back = record_from_json(json::parse(to_jsonl(r)));
  CHECK(to_jsonl(back) == to_jsonl(r));
  CHECK(to_jsonl(r).find('\n') == std::string::npos);

  const auto header = csv_header();
  CHECK(header.rfind("sim_time_s,P_science_torr,", 0) == 0);
  const auto line = to_csv(r);
  CHECK(std::count(line.begin(), line.end(), ',') == std::count(header.begin(), header.end(), ','));
  CHECK(std::stod(line.substr(line.find(',') + 1)) == doctest::Approx(r.p_science).epsilon(1e-6));
}

TEST_CASE("telemetry writer reports unwritable output") {
  try {
    TelemetryWriter w("/nonexistent/dir/t.jsonl");
    FAIL("expected output_unwritable");
  } catch (const Error& e) {
    CHECK(e.kind() == "output_unwritable");
  }
  const auto p = tmp_path("writer.jsonl");
  const auto c = tmp_path("writer.csv");
  {
    TelemetryWriter w(p, c);
    Simulation sim(default_config());
    sim.flush();
    for (const auto& r : sim.take_telemetry()) w.write(r);
  }
  const auto body = slurp(p);
  CHECK(std::count(body.begin(), body.end(), '\n') == 1);
  CHECK(slurp(c).rfind(csv_header(), 0) == 0);
  std::filesystem::remove(p);
  std::filesystem::remove(c);
}

TEST_CASE("records follow the cadence and carry every command") {
  Simulation sim(default_config());
  const char* cmds[] = {
      R"({"verb": "open_gate_valve"})",  // already open: interlock rejection
      R"({"verb": "move_translator", "params": {"target": "0 m"}})",
      R"({"verb": "open_flanges"})",
      R"({"verb": "move_translator", "params": {"target": "9 m"}})",
  };
  int submitted = 0;
  for (const char* c : cmds) {
    try {
      sim.submit(parse_command(json::parse(c)));
    } catch (const CommandError&) {
    }
    ++submitted;
    sim.advance_to(sim.time() + 7.5);
  }
  sim.advance_to(320.0);  // translator clear of the gate
  sim.submit(parse_command(json::parse(R"({"verb": "close_gate_valve"})")));
  ++submitted;
  sim.advance_to(400.0);
  sim.flush();
  const auto recs = sim.take_telemetry();

  int command_events = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (i) CHECK(recs[i].sim_time > recs[i - 1].sim_time);
    for (const auto& e : recs[i].events)
      if (e.rfind("accepted:", 0) == 0 || e.rfind("rejected:", 0) == 0 || e.rfind("forced:", 0) == 0)
        ++command_events;
  }
  CHECK(command_events == submitted);

  // every cadence point up to 400 s has its own record
  for (double t = 0; t <= 400.0; t += 10.0) {
    bool found = false;
    for (const auto& r : recs) found |= r.sim_time == t;
    CAPTURE(t);
    CHECK(found);
  }
  CHECK(recs.back().sim_time == 400.0);
  CHECK(recs.back().devices.gate_valve == "closed");

  bool range_logged = false;
  for (const auto& r : recs)
    for (const auto& e : r.events) range_logged |= e == "rejected:move_translator:parameter_out_of_range";
  CHECK(range_logged);
}

TEST_CASE("clock cannot run backwards") {
  Simulation sim(default_config());
  sim.advance_to(20.0);
  CHECK_THROWS_AS(sim.advance_to(10.0), PreconditionError);
}

TEST_CASE("snapshot exposes the documented quantities") {
  Simulation sim(default_config());
  const auto s = sim.snapshot();
  CHECK(resolve_quantity(s, "P_science").get<double>() == doctest::Approx(3e-10).epsilon(0.01));
  CHECK(resolve_quantity(s, "/chambers/science/pressure") == resolve_quantity(s, "P_science"));
  CHECK(resolve_quantity(s, "gate_valve") == "open");
  CHECK(resolve_quantity(s, "phase") == "a");
  CHECK(resolve_quantity(s, "checklist_complete") == false);
  CHECK(resolve_quantity(s, "violations") == json::array());
  CHECK(resolve_quantity(s, "translator").get<double>() == doctest::Approx(1.524));
  CHECK(s["results"]["transport"].is_null());

  for (const char* bad : {"pressure", "/no/such/field", ""}) {
    try {
      resolve_quantity(s, bad);
      FAIL("expected unknown_quantity");
    } catch (const CommandError& e) {
      CHECK(e.kind() == "unknown_quantity");
    }
  }
}

TEST_CASE("calculators run through the command path") {
  auto cfg = default_config();
  cfg.transport.atoms = 64;
  Simulation sim(cfg);
  auto rejected = sim.submit(parse_command(json::parse(R"({"verb": "run_transport"})")));
  CHECK_FALSE(rejected.accepted);
  CHECK(rejected.reason == "MOT off");

  REQUIRE(sim.submit(parse_command(json::parse(R"({"verb": "run_mot"})"))).accepted);
  const auto tr = sim.submit(parse_command(json::parse(R"({"verb": "run_transport"})")));
  REQUIRE(tr.result);
  CHECK((*tr.result)["duration"].get<double>() == doctest::Approx(0.12995).epsilon(1e-3));
  CHECK((*tr.result)["survival_fraction"].get<double>() > 0.85);
  CHECK(sim.transport_result() == tr.result);

  const auto tf = sim.submit(parse_command(json::parse(R"({"verb": "run_tof"})")));
  REQUIRE(tf.result);
  CHECK((*tf.result)["temperature"].get<double>() == doctest::Approx(cfg.tof.cloud.temperature).epsilon(0.05));
  CHECK(sim.snapshot()["results"]["tof"] == *tf.result);

  sim.flush();
  int results = 0;
  for (const auto& r : sim.take_telemetry())
    for (const auto& e : r.events) results += e.rfind("result:", 0) == 0;
  CHECK(results == 2);
}

TEST_CASE("scenario loading validates its input") {
  CHECK_NOTHROW(load_scenario(scenario_with_end(400)));
  const auto sc = load_scenario(scenario_with_end(400));
  REQUIRE(sc.steps.size() == 4);
  CHECK(sc.steps[3].at == doctest::Approx(321.0));
  CHECK(sc.steps[1].phase == "a");
  CHECK(sc.assertions[1].at == doctest::Approx(400.0));
  CHECK(sc.assertions[1].max == doctest::Approx(1e-9));

  auto bad = [](const char* text) {
    try {
      load_scenario(json::parse(text));
    } catch (const ConfigError&) {
      return true;
    } catch (const CommandError&) {
      return true;
    }
    return false;
  };
  CHECK(bad(R"({"steps": [{"at": "1 s", "after": "1 s", "verb": "close_gate_valve"}]})"));
  CHECK(bad(R"({"steps": [{"at": "5 s", "verb": "close_gate_valve"}, {"at": "1 s", "verb": "close_gate_valve"}]})"));
  CHECK(bad(R"({"steps": [{"at": "1 s", "verb": "close_gate_valve", "when": 3}]})"));
  CHECK(bad(R"({"stepz": []})"));
  CHECK(bad(R"({"steps": [{"at": "1 Torr", "verb": "close_gate_valve"}]})"));
  CHECK(bad(R"({"steps": [{"at": "1 s", "verb": "fly"}]})"));
  CHECK(bad(R"({"assertions": [{"at": "end", "quantity": "P_science", "max": "1 m"}]})"));
  CHECK_THROWS_AS(load_scenario_file("/nonexistent/s.json"), ConfigError);

  const auto cycle = load_scenario_file(LLT_SOURCE_DIR "/scenarios/cycle.json");
  CHECK(cycle.steps.size() == 15);
  CHECK(cycle.end == doctest::Approx(627900.0));
}

TEST_CASE("paused run processes only the first instant") {
  RunOptions opt;
  opt.speedup = 0.0;
  const auto rep = run(default_config(), load_scenario(json::parse(R"({"name": "idle"})")), opt);
  CHECK(rep.records == 1);
  CHECK(rep.sim_time == 0.0);
  CHECK(rep.passed());
}

TEST_CASE("runs are deterministic and independent of speedup") {
  const auto sc = load_scenario(scenario_with_end(400));
  const auto a = tmp_path("slow.jsonl");
  const auto b = tmp_path("fast.jsonl");
  const auto c = tmp_path("unpaced.jsonl");

  RunOptions slow;
  slow.speedup = 1e2;
  slow.telemetry_path = a;
  RunOptions fast = slow;
  fast.speedup = 1e4;
  fast.telemetry_path = b;
  RunOptions unpaced = slow;
  unpaced.pace = false;
  unpaced.telemetry_path = c;

  const auto ra = run(default_config(), sc, slow);
  const auto rb = run(default_config(), sc, fast);
  const auto rc = run(default_config(), sc, unpaced);
  CHECK(ra.passed());
  CHECK(ra.wall_seconds > 3.5);
  CHECK(rb.wall_seconds < 1.0);
  CHECK(std::fabs(ra.p_science - rb.p_science) <= 1e-9 * ra.p_science);
  CHECK(std::fabs(ra.p_loadlock - rb.p_loadlock) <= 1e-9 * ra.p_loadlock);
  CHECK(ra.records == rb.records);

  const auto ta = slurp(a);
  CHECK_FALSE(ta.empty());
  CHECK(ta == slurp(b));
  CHECK(ta == slurp(c));
  for (const auto& p : {a, b, c}) std::filesystem::remove(p);
}

TEST_CASE("a step out of checklist order aborts with its phase") {
  // reconnecting to a freshly vented loadlock, skipping pump-down and bake
  const auto sc = load_scenario(json::parse(R"({
    "steps": [
      {"phase": "a", "at": "0 s", "verb": "move_translator", "params": {"target": "0 m"}},
      {"phase": "a", "at": "310 s", "verb": "close_gate_valve"},
      {"phase": "b", "at": "320 s", "verb": "stop_ion_pump", "params": {"pump": "loadlock"}},
      {"phase": "b", "after": "1 s", "verb": "open_angle_valve"},
      {"phase": "e", "at": "400 s", "verb": "open_gate_valve"}
    ]
  })"));
  std::vector<TelemetryRecord> seen;
  RunOptions opt;
  opt.pace = false;
  opt.sink = [&](const TelemetryRecord& r) { seen.push_back(r); };
  try {
    run(default_config(), sc, opt);
    FAIL("expected ScenarioAbort");
  } catch (const ScenarioAbort& e) {
    CHECK(e.phase == "e");
    CHECK_FALSE(e.reason.empty());
  }
  bool logged = false;
  for (const auto& r : seen)
    for (const auto& e : r.events) logged |= e.rfind("rejected:open_gate_valve", 0) == 0;
  CHECK(logged);
}

TEST_CASE("expected rejections pass and failed assertions are reported") {
  const auto sc = load_scenario(json::parse(R"({
    "steps": [
      {"phase": "a", "at": "0 s", "verb": "open_flanges", "expect": "rejected"}
    ],
    "assertions": [
      {"at": "0 s", "quantity": "P_science", "max": "1e-12 Torr", "label": "too strict"},
      {"at": "0 s", "quantity": "P_science", "approx": "3e-10 Torr", "tolerance": 0.02, "label": "ok"}
    ]
  })"));
  RunOptions opt;
  opt.pace = false;
  const auto rep = run(default_config(), sc, opt);
  REQUIRE(rep.assertions.size() == 2);
  CHECK_FALSE(rep.assertions[0].passed);
  CHECK(rep.assertions[1].passed);
  CHECK_FALSE(rep.passed());
  CHECK(rep.to_json()["assertions"].size() == 2);

  const auto wrong = load_scenario(json::parse(R"({
    "steps": [{"phase": "a", "at": "0 s", "verb": "move_translator", "params": {"target": "0 m"}, "expect": "rejected"}]
  })"));
  CHECK_THROWS_AS(run(default_config(), wrong, opt), ScenarioAbort);
}
