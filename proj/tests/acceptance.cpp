// Acceptance report: one PASS/FAIL line per headline criterion, with the
// measured values next to their bounds. Exit status is nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "llt/apparatus.hpp"
#include "llt/coils.hpp"
#include "llt/config.hpp"
#include "llt/constants.hpp"
#include "llt/conveyor.hpp"
#include "llt/engine.hpp"
#include "llt/errors.hpp"
#include "llt/tof.hpp"
#include "llt/vacuum.hpp"

using namespace llt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

struct Line {
  bool ok = true;
  std::string detail;

  void check(bool cond, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Line::check(bool cond, const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!cond) {
    detail += " [x]";
    ok = false;
  }
}

int failures = 0;

void report(const char* name, const std::function<void(Line&)>& body) {
  Line line;
  const auto t0 = Clock::now();
  try {
    body(line);
  } catch (const std::exception& e) {
    line.check(false, "threw: %s", e.what());
  }
  std::printf("%s  %-22s %s (%.2f s)\n", line.ok ? "PASS" : "FAIL", name, line.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
  failures += !line.ok;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("llt_acceptance_" + name)).string();
}

// --- coils ------------------------------------------------------------------

void coils(Line& l) {
  const auto t0 = Clock::now();
  const mag::CoilPair dist;
  mag::CoilPair coll;
  coll.winding = mag::Winding::collapsed;

  const double g = mag::gradient_at(dist, {0, 0, 0})(2, 2) / 1e-2;  // G/cm
  l.check(std::fabs(g - 20.0) <= 0.15 * 20.0, "dBz/dz %.2f G/cm (20 +/- 15%%)", g);

  const double gc = mag::gradient_at(coll, {0, 0, 0})(2, 2);
  const double ga = mag::center_gradient_analytic(coll);
  l.check(rel(gc, ga) <= 1e-3, "collapsed vs analytic gradient %.1e (<= 1e-3)", rel(gc, ga));

  // Field along the axis against the superposed closed-form loop fields.
  double worst = 0.0;
  for (const auto& coil : {dist, coll}) {
    const auto ls = mag::loops(coil);
    for (int k = 1; k <= 40; ++k) {
      const double z = -0.04 + 0.08 * k / 41.0;
      double want = 0.0;
      for (const auto& lp : ls) want += mag::on_axis_loop_field(lp.radius, lp.current, z - lp.z);
      worst = std::max(worst, rel(mag::field_at(coil, {0, 0, z}).z, want));
    }
  }
  l.check(worst <= 1e-3, "on-axis field vs analytic %.1e (<= 1e-3)", worst);
  const double t = seconds_since(t0);
  l.check(t < 1.0, "%.2f s (< 1 s)", t);
}

// --- conveyor ---------------------------------------------------------------

void conveyor_suite(Line& l) {
  const auto t0 = Clock::now();
  const double lambda = 785e-9;
  const double v = conveyor::lattice_velocity(2e6, lambda);
  l.check(rel(v, 0.785) <= 0.01, "v(2 MHz) %.4f m/s (0.785 +/- 1%%)", v);

  const double u38 = phys::kB * 38e-6;
  const double f = conveyor::axial_frequency(u38, lambda);
  l.check(rel(f, 110e3) <= 0.05, "f_ax(38 uK) %.1f kHz (110 +/- 5%%)", f / 1e3);

  const auto d = conveyor::dipole_depth(conveyor::default_lattice());
  l.check(d.microkelvin >= 19.0 && d.microkelvin <= 76.0 && d.attractive, "dipole depth %.1f uK (38 uK x/ 2)",
          d.microkelvin);

  const double ac = conveyor::critical_acceleration(u38, lambda);
  l.check(ac > 1500.0, "a_c %.0f m/s^2 (> 1500)", ac);
  const double t = seconds_since(t0);
  l.check(t < 1.0, "%.2f s (< 1 s)", t);
}

// --- transport --------------------------------------------------------------

void transport(Line& l) {
  const auto plan = conveyor::plan_transport(0.1016, 0.785, 1500.0);
  l.check(rel(plan.duration, 0.130) <= 0.01, "plan %.2f ms (130 +/- 1%%)", plan.duration * 1e3);

  const auto cfg = conveyor::default_lattice();
  const auto t0 = Clock::now();
  const auto r = conveyor::simulate_transport(cfg, plan, 6e-6, 1000, 42);
  const double t = seconds_since(t0);
  l.check(r.survival_fraction >= 0.95, "survival %.3f (>= 0.95)", r.survival_fraction);
  l.check(t < 10.0, "1000 atoms %.2f s (< 10 s)", t);

  // Static control: 10^4 axial periods, energies windowed over 1000 steps.
  const double f = conveyor::axial_frequency(conveyor::operating_depth(cfg), cfg.beam_up.wavelength);
  conveyor::TransportOptions opt;
  opt.energy_window = 1000;
  opt.bound_only = true;
  const auto s = conveyor::simulate_transport(cfg, conveyor::TransportPlan::stationary(1e4 / f), 6e-6, 32, 1, opt);
  l.check(s.max_energy_drift <= 1e-4 * s.depth, "static drift %.1e U0 (<= 1e-4)", s.max_energy_drift / s.depth);
}

// --- time of flight ---------------------------------------------------------

void tof_round_trip(Line& l) {
  const auto t0 = Clock::now();
  for (double temp : {1e-6, 3e-6, 6e-6, 10e-6, 30e-6, 50e-6}) {
    tof::ThermalCloud cloud;
    cloud.temperature = temp;
    int hits = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto run = tof::synthetic_run(cloud, tof::default_times(), tof::RenderOptions{},
                                          1000 + static_cast<std::uint64_t>(trial));
      hits += rel(run.fit.temperature, temp) <= 0.05;
    }
    l.check(hits >= 19, "%g uK %d/20", temp * 1e6, hits);
  }

  // Noiseless samples on the exact expansion law.
  double worst = 0.0;
  for (double temp : {1e-6, 10e-6, 50e-6}) {
    std::vector<tof::Sample> s;
    for (double t : tof::default_times()) s.push_back({t, tof::expanded_sigma(200e-6, temp, t)});
    const auto fit = tof::fit_temperature(s);
    worst = std::max(worst, rel(fit.temperature, temp));
  }
  l.check(worst <= 1e-10, "noiseless fit %.1e (<= 1e-10)", worst);
  const double t = seconds_since(t0);
  l.check(t < 30.0, "%.1f s (< 30 s)", t);
}

// --- vacuum -----------------------------------------------------------------

// The paced cycle's telemetry is reused by the determinism check below.
std::string paced_telemetry;

void vacuum(Line& l) {
  {
    // One chamber, one pump: the integrator must settle on Q / S.
    vac::VacuumNetwork net;
    vac::Chamber ch;
    ch.name = "box";
    ch.volume = 50.0;
    ch.walls = {"walls", 1e4, 0.0};
    ch.pressure = 1e-6;
    net.chambers = {ch};
    vac::Pump p;
    p.name = "ion";
    p.chamber = 0;
    p.nominal_speed = 40.0;
    p.state = vac::PumpState::on;
    net.pumps = {p};
    const double q = vac::outgassing_load(net.chambers[0], net.outgassing);
    const double closed = q / 40.0;
    vac::step(net, 50 * 50.0 / 40.0);
    const double e = rel(net.chambers[0].pressure, closed);
    l.check(e <= 0.01, "P* = Q/S %.2e Torr, integrator off by %.1e (<= 1%%)", closed, e);
  }

  const auto cfg = engine::default_config();
  const auto sc = engine::load_scenario_file(LLT_SOURCE_DIR "/scenarios/cycle.json");
  engine::RunOptions opt;
  opt.speedup = 1e4;
  opt.telemetry_path = tmp_path("paced.jsonl");
  const auto rep = engine::run(cfg, sc, opt);
  paced_telemetry = opt.telemetry_path;
  const double days = rep.sim_time / 86400.0;
  l.check(rep.passed(), "cycle scenario assertions %s", rep.passed() ? "pass" : "fail");
  l.check(rep.wall_seconds < 120.0, "cycle at 1e4x %.1f s wall (< 120 s)", rep.wall_seconds);
  l.check(days >= 4.0 && days <= 10.0, "span %.2f d ([4, 10])", days);
  l.check(rep.p_science >= 4e-10 / 1.5 && rep.p_science <= 4e-10 * 1.5, "P_science %.3g Torr (4e-10 x/ 1.5)",
          rep.p_science);
  l.check(rep.p_loadlock >= 4.5e-10 / 1.5 && rep.p_loadlock <= 4.5e-10 * 1.5, "P_loadlock %.3g Torr (4.5e-10 x/ 1.5)",
          rep.p_loadlock);
}

// --- interlocks -------------------------------------------------------------

app::DeviceCommand random_command(std::mt19937_64& rng, double throw_m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  app::DeviceCommand c;
  c.verb = app::kVerbs[rng() % app::kVerbs.size()];
  c.pump = rng() % 2 ? app::IonPump::science : app::IonPump::loadlock;
  c.on = rng() % 4 != 0;
  c.setpoint = 20.0 + 130.0 * u(rng);
  const double pick = u(rng);
  c.target = pick < 0.4 ? 0.0 : pick < 0.8 ? throw_m : throw_m * u(rng);
  c.index = static_cast<int>(rng() % 4);
  c.current = 10.0 * u(rng);
  return c;
}

// Mixed into the random stream so the fuzzer also walks the exchange cycle
// and reaches vented, baking and reconnected states.
const app::Verb kCycle[] = {
    app::Verb::move_translator, app::Verb::close_gate_valve, app::Verb::stop_ion_pump,   app::Verb::open_angle_valve,
    app::Verb::open_flanges,    app::Verb::install_cavity,   app::Verb::seal_flanges,     app::Verb::start_turbo,
    app::Verb::start_ion_pump,  app::Verb::set_bake,         app::Verb::close_angle_valve, app::Verb::stop_turbo,
    app::Verb::open_gate_valve, app::Verb::move_translator};

void interlocks(Line& l) {
  const auto t0 = Clock::now();
  const int n = 100000;
  std::mt19937_64 rng(20240601);
  std::exponential_distribution<double> wait(1.0 / 120.0);
  auto a = engine::make_apparatus(engine::default_config());
  int accepted = 0, violations = 0, science_vented = 0, exposed = 0, vented = 0, baked = 0;
  std::size_t cycle = 0;
  for (int k = 0; k < n; ++k) {
    auto c = random_command(rng, a.params().translator_throw);
    if (rng() % 3 == 0) {
      c.verb = kCycle[cycle++ % std::size(kCycle)];
      c.pump = app::IonPump::loadlock;
    }
    c.force = false;
    try {
      accepted += a.submit(c).accepted;
    } catch (const CommandError&) {
    }
    const auto& d = a.devices();
    exposed += d.flanges_open && d.gate_valve != app::ValveState::closed;
    a.advance_to(a.time() + wait(rng));
    violations += !a.violations().empty();
    const auto r = a.readings();
    science_vented += r.p_science >= 1.0;
    vented += r.p_loadlock > 700.0;
    baked += r.t_loadlock > 60.0;
  }
  l.check(violations == 0 && exposed == 0, "%d commands, %d accepted, %d invariant violations", n, accepted,
          violations + exposed);
  l.check(science_vented == 0, "science vented %d times", science_vented);
  l.check(vented > 0 && baked > 0, "reached vented (%d) and baked (%d) states", vented, baked);

  // Same scenario, same seeds, unpaced this time: telemetry must match the
  // paced run byte for byte.
  engine::RunOptions opt;
  opt.pace = false;
  opt.telemetry_path = tmp_path("unpaced.jsonl");
  engine::run(engine::default_config(), engine::load_scenario_file(LLT_SOURCE_DIR "/scenarios/cycle.json"), opt);
  const auto x = slurp(opt.telemetry_path);
  const auto y = slurp(paced_telemetry);
  l.check(!x.empty() && x == y, "telemetry byte-identical across runs (%zu bytes)", x.size());
  std::filesystem::remove(opt.telemetry_path);
  std::filesystem::remove(paced_telemetry);

  const double t = seconds_since(t0);
  l.check(t < 60.0, "%.1f s (< 60 s)", t);
}

}  // namespace

int main() {
  report("coil gradient", coils);
  report("conveyor consistency", conveyor_suite);
  report("transport monte carlo", transport);
  report("tof round trip", tof_round_trip);
  report("vacuum milestones", vacuum);
  report("interlock safety", interlocks);
  std::printf("%s: %d failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
