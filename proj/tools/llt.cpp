// llt: command-line front end. Simulation runs, the HTTP/WebSocket service
// and the stand-alone calculators (coils, transport, tof).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "llt/coils.hpp"
#include "llt/config.hpp"
#include "llt/conveyor.hpp"
#include "llt/engine.hpp"
#include "llt/errors.hpp"
#include "llt/service.hpp"
#include "llt/tof.hpp"

using namespace llt;

namespace {

std::atomic<bool> g_interrupted{false};

engine::ApparatusConfig config_from(const std::string& path) {
  std::string p = path;
  if (p.empty())
    if (const char* env = std::getenv("LLT_CONFIG")) p = env;
  return p.empty() ? engine::default_config() : engine::load_config_file(p);
}

std::FILE* open_out(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("output_unwritable", "cannot write " + path);
  return f;
}

int cmd_run(const std::string& config, const std::string& scenario, double speedup, const std::string& telemetry,
            const std::string& csv, const std::string& report, bool no_pace) {
  const auto cfg = config_from(config);
  const auto sc = engine::load_scenario_file(scenario);
  engine::RunOptions opt;
  opt.speedup = speedup;
  opt.pace = !no_pace;
  opt.telemetry_path = telemetry;
  opt.csv_path = csv;
  const auto rep = engine::run(cfg, sc, opt);

  std::printf("scenario   %s\n", rep.scenario.c_str());
  std::printf("sim span   %.1f s (%.3f d), %zu telemetry records, %.2f s wall\n", rep.sim_time,
              rep.sim_time / 86400.0, rep.records, rep.wall_seconds);
  for (const auto& p : rep.phases) {
    if (p.started && p.completed)
      std::printf("phase %c    %-46s %10.1f s\n", p.id, p.title.c_str(), *p.completed - *p.started);
    else
      std::printf("phase %c    %-46s %10s\n", p.id, p.title.c_str(), "incomplete");
  }
  std::printf("final      P_science %.3e Torr, P_loadlock %.3e Torr\n", rep.p_science, rep.p_loadlock);
  for (const auto& a : rep.assertions)
    std::printf("%s  t=%-10.0f %-42s %s = %s\n", a.passed ? "PASS" : "FAIL", a.at, a.label.c_str(),
                a.quantity.c_str(), a.value.dump().c_str());
  if (!report.empty()) {
    std::FILE* f = open_out(report);
    std::fprintf(f, "%s\n", rep.to_json().dump(2).c_str());
    std::fclose(f);
  }
  return rep.passed() ? 0 : 1;
}

int cmd_serve(const std::string& config, const std::string& address, int port, double speedup,
              const std::string& static_dir) {
  auto cfg = config_from(config);
  engine::ServiceOptions opt;
  opt.address = address;
  opt.port = static_cast<unsigned short>(port);
  opt.speedup = speedup >= 0.0 ? speedup : cfg.service_speedup;
  opt.static_dir = static_dir;
  engine::Service svc(std::move(cfg), opt);
  svc.start();
  std::printf("llt serving on http://%s:%u (speedup %g)\n", address.c_str(), svc.port(), opt.speedup);
  std::fflush(stdout);
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  return 0;
}

int cmd_coils(const std::string& config, double current, const std::string& winding, double half_span, int n,
              const std::string& csv, bool quadrature) {
  auto coils = config_from(config).coils;
  if (current == current) coils.current = current;  // NaN = keep configured
  if (winding == "collapsed") coils.winding = mag::Winding::collapsed;
  if (winding == "distributed") coils.winding = mag::Winding::distributed;
  mag::validate(coils);
  mag::FieldOptions fo;
  if (quadrature) fo.method = mag::FieldMethod::quadrature;

  const auto g = mag::gradient_at(coils, coils.center, fo);
  const double dbz = g(2, 2) * 100.0;  // T/m -> G/cm
  const double analytic = mag::center_gradient_analytic(coils) * 100.0;
  std::printf("center gradient dBz/dz = %.3f G/cm at %.3f A (%d turns per coil, %s winding)\n", dbz, coils.current,
              coils.turns_per_coil(), coils.winding == mag::Winding::collapsed ? "collapsed" : "distributed");
  std::printf("radial gradient dBx/dx = %.3f G/cm, analytic on-axis (collapsed) = %.3f G/cm\n", g(0, 0) * 100.0,
              analytic);
  if (!csv.empty()) {
    const auto pts = mag::cube_grid(coils.center, half_span, n);
    const auto b = mag::field_grid(coils, pts, fo);
    std::FILE* f = open_out(csv);
    std::fprintf(f, "x_m,y_m,z_m,Bx_G,By_G,Bz_G\n");
    for (std::size_t k = 0; k < pts.size(); ++k)
      std::fprintf(f, "%.6e,%.6e,%.6e,%.6e,%.6e,%.6e\n", pts[k].x, pts[k].y, pts[k].z, b[k].x * 1e4, b[k].y * 1e4,
                   b[k].z * 1e4);
    std::fclose(f);
    std::printf("wrote %zu field samples to %s\n", pts.size(), csv.c_str());
  }
  return 0;
}

int cmd_transport(const std::string& config, double distance, double v_max, double a_max, double temp, int atoms,
                  std::uint64_t seed, const std::string& csv, bool serial, bool bound_only) {
  const auto cfg = config_from(config);
  const auto& lat = cfg.lattice;
  if (distance != distance) distance = cfg.transport.distance;
  if (v_max != v_max) v_max = cfg.transport.v_max;
  if (a_max != a_max) a_max = cfg.transport.a_max;
  if (temp != temp) temp = cfg.transport.temperature;
  if (atoms <= 0) atoms = cfg.transport.atoms;
  conveyor::validate(lat);

  const auto plan = conveyor::plan_transport(distance, v_max, a_max);
  const double depth = conveyor::operating_depth(lat);
  const double lambda = lat.beam_up.wavelength;
  std::printf("distance            %.4f m\n", plan.distance);
  std::printf("duration            %.2f ms (%s profile)\n", plan.duration * 1e3,
              plan.triangular() ? "triangular" : "trapezoidal");
  std::printf("peak velocity       %.4f m/s\n", plan.profile.empty() ? 0.0 : plan.profile[0].v1);
  std::printf("lattice depth       %.2f uK\n", depth / phys::kB * 1e6);
  std::printf("axial frequency     %.1f kHz\n", conveyor::axial_frequency(depth, lambda) * 1e-3);
  std::printf("critical accel      %.0f m/s^2 (plan uses %.0f)\n", conveyor::critical_acceleration(depth, lambda),
              a_max);

  conveyor::TransportOptions to;
  to.bound_only = bound_only;
  to.trace_points = csv.empty() ? 0 : 201;
  const auto res = serial ? conveyor::simulate_transport_serial(lat, plan, temp, atoms, seed, to)
                          : conveyor::simulate_transport(lat, plan, temp, atoms, seed, to);
  std::printf("atoms               %d at %.2f uK, seed %llu\n", atoms, temp * 1e6,
              static_cast<unsigned long long>(seed));
  std::printf("survival            %.4f\n", res.survival_fraction);
  std::printf("mean energy gain    %.4f uK\n", res.mean_energy_gain / phys::kB * 1e6);
  if (!csv.empty()) {
    std::FILE* f = open_out(csv);
    std::fprintf(f, "t_s,z_lattice_m,survival\n");
    for (const auto& p : res.trace) std::fprintf(f, "%.6e,%.6e,%.6f\n", p.t, p.z_lattice, p.survival);
    std::fclose(f);
  }
  return 0;
}

std::vector<tof::Sample> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<tof::Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ss(line);
    double t, s;
    if (!(ss >> t >> s)) {
      if (out.empty() && lineno == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected t_s,sigma_m");
    }
    out.push_back({t, s});
  }
  return out;
}

int cmd_tof(const std::string& config, bool synthetic, double temp, std::uint64_t seed, const std::string& input,
            const std::vector<std::string>& images, const std::string& fit_csv) {
  const auto cfg = config_from(config);
  std::vector<tof::Sample> samples;
  double truth = -1.0;
  if (synthetic) {
    auto cloud = cfg.tof.cloud;
    if (temp == temp) cloud.temperature = temp;
    truth = cloud.temperature;
    samples = tof::synthetic_run(cloud, cfg.tof.times, cfg.tof.render, seed).samples;
  } else if (!input.empty()) {
    samples = read_samples(input);
  } else if (!images.empty()) {
    for (const auto& path : images) {
      const auto img = tof::read_pgm(path);
      const auto spot = tof::extract_sigma(img);
      samples.push_back({img.expansion_time, spot.sigma_x});
      samples.push_back({img.expansion_time, spot.sigma_y});
    }
  } else {
    throw ConfigError("tof needs --synthetic, --input <csv> or --images <pgm...>");
  }

  const auto fit = tof::fit_temperature(samples);
  std::printf("T = %.4f uK  [%.4f, %.4f] (%.0f%% CI)  sigma0 = %.2f um  n = %zu", fit.temperature * 1e6,
              fit.temperature_ci_low * 1e6, fit.temperature_ci_high * 1e6, fit.confidence * 100.0, fit.sigma0 * 1e6,
              samples.size());
  if (truth > 0) std::printf("  (true %.4f uK, error %+.2f%%)", truth * 1e6, 100.0 * (fit.temperature / truth - 1.0));
  std::printf("\n");
  if (!fit_csv.empty()) {
    std::FILE* f = open_out(fit_csv);
    std::fprintf(f, "t_s,sigma_m,sigma_fit_m\n");
    for (const auto& s : samples)
      std::fprintf(f, "%.6e,%.6e,%.6e\n", s.t, s.sigma, std::sqrt(fit.intercept + fit.slope * s.t * s.t));
    std::fclose(f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity-loadlock cold-atom apparatus simulator"};
  app.require_subcommand(1);
  const double nan = std::nan("");

  std::string config;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config, "configuration JSON (default: $LLT_CONFIG, else built-in defaults)");
  };

  auto* run = app.add_subcommand("run", "run a scenario and write telemetry");
  add_config(run);
  std::string scenario, telemetry, csv, report;
  double speedup = 1.0;
  bool no_pace = false;
  run->add_option("--scenario", scenario, "scenario JSON")->required();
  run->add_option("--speedup", speedup, "simulated seconds per wall second (0 = paused)")->check(CLI::NonNegativeNumber);
  run->add_option("--telemetry", telemetry, "JSONL telemetry output");
  run->add_option("--csv", csv, "CSV projection of the pressure columns");
  run->add_option("--report", report, "write the exit report as JSON");
  run->add_flag("--no-pace", no_pace, "ignore wall-clock pacing and run as fast as possible");

  auto* serve = app.add_subcommand("serve", "serve the HTTP/WebSocket API");
  add_config(serve);
  int port = 8080;
  std::string address = "127.0.0.1", static_dir;
  double serve_speedup = -1.0;
  serve->add_option("--port", port, "TCP port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--address", address, "bind address");
  serve->add_option("--speedup", serve_speedup, "initial speedup (default from config)");
  serve->add_option("--static", static_dir, "directory with the console bundle");

  auto* coils = app.add_subcommand("coils", "MOT coil field and center gradient");
  add_config(coils);
  double current = nan, half_span = 0.01;
  std::string winding;
  int grid_n = 11;
  bool quadrature = false;
  std::string field_csv;
  coils->add_option("--current", current, "coil current in A");
  coils->add_option("--winding", winding, "distributed or collapsed")->check(CLI::IsMember({"distributed", "collapsed"}));
  coils->add_option("--csv", field_csv, "write x,y,z,Bx,By,Bz (m, G) on a cube grid");
  coils->add_option("--half-span", half_span, "grid half span in m");
  coils->add_option("--n", grid_n, "grid points per axis")->check(CLI::Range(2, 401));
  coils->add_flag("--quadrature", quadrature, "numerical Biot-Savart quadrature instead of elliptic integrals");

  auto* transport = app.add_subcommand("transport", "conveyor transport plan and Monte Carlo");
  add_config(transport);
  double distance = nan, v_max = nan, a_max = nan, ttemp = nan;
  int atoms = 0;
  std::uint64_t tseed = 42;
  std::string trace_csv;
  bool serial = false, bound_only = false;
  transport->add_option("--distance", distance, "transport distance in m");
  transport->add_option("--vmax", v_max, "velocity cap in m/s");
  transport->add_option("--amax", a_max, "acceleration cap in m/s^2");
  transport->add_option("--temp", ttemp, "atom temperature in K");
  transport->add_option("--atoms", atoms, "Monte Carlo atoms");
  transport->add_option("--seed", tseed, "RNG seed");
  transport->add_option("--csv", trace_csv, "write t, z_lattice, survival");
  transport->add_flag("--serial", serial, "use the serial reference kernel");
  transport->add_flag("--bound-only", bound_only, "sample only atoms bound in the initial well");

  auto* tofc = app.add_subcommand("tof", "time-of-flight temperature fit");
  add_config(tofc);
  bool synthetic = false;
  double temp = nan;
  std::uint64_t fseed = 11;
  std::string input, fit_csv;
  std::vector<std::string> images;
  tofc->add_flag("--synthetic", synthetic, "render and fit synthetic images");
  tofc->add_option("--temp", temp, "synthetic cloud temperature in K");
  tofc->add_option("--seed", fseed, "RNG seed for synthetic images");
  tofc->add_option("--input", input, "CSV of t_s,sigma_m samples");
  tofc->add_option("--images", images, "16-bit PGM images to fit");
  tofc->add_option("--fit-csv", fit_csv, "write t, sigma, fitted sigma");

  auto* cfgc = app.add_subcommand("config", "print the effective configuration as JSON");
  add_config(cfgc);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, scenario, speedup, telemetry, csv, report, no_pace);
    if (*serve) return cmd_serve(config, address, port, serve_speedup, static_dir);
    if (*coils) return cmd_coils(config, current, winding, half_span, grid_n, field_csv, quadrature);
    if (*transport)
      return cmd_transport(config, distance, v_max, a_max, ttemp, atoms, tseed, trace_csv, serial, bound_only);
    if (*tofc) return cmd_tof(config, synthetic, temp, fseed, input, images, fit_csv);
    if (*cfgc) {
      std::printf("%s\n", engine::to_json(config_from(config)).dump(2).c_str());
      return 0;
    }
  } catch (const ScenarioAbort& e) {
    std::fprintf(stderr, "llt: scenario aborted in phase %s: %s\n", e.phase.c_str(), e.reason.c_str());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "llt: %s: %s\n", e.kind().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "llt: %s\n", e.what());
    return 2;
  }
  return 0;
}
