#include "llt/vacuum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/numeric/odeint.hpp>

#include "llt/errors.hpp"

namespace llt::vac {
namespace {

namespace odeint = boost::numeric::odeint;
using State = std::vector<double>;

const double kLnFloor = std::log(kPressureFloor);
const double kLnAtm = std::log(kAtmosphere);

double decay_rate(double temperature, const OutgassingModel& m) {
  return std::exp2((temperature - m.bake_ref_temp) / m.temp_doubling) / m.bake_time_const_ref;
}

// \int_0^s dt / tau(T0 + r t)
double decay_exponent(double t0, double r, double s, const OutgassingModel& m) {
  if (r == 0.0) return decay_rate(t0, m) * s;
  return m.temp_doubling / (r * std::log(2.0)) * (decay_rate(t0 + r * s, m) - decay_rate(t0, m));
}

double ramp_sign(const Chamber& ch) {
  if (ch.temperature < ch.temperature_target) return 1.0;
  if (ch.temperature > ch.temperature_target) return -1.0;
  return 0.0;
}

double advance_surface(double c, bool exposed, double t0, double r, double s,
                       const OutgassingModel& m) {
  if (exposed) return 1.0;
  return c * std::exp(-decay_exponent(t0, r, s, m));
}

double pressure_of(const VacuumNetwork& net, int node, const State& y) {
  if (node == kAir) return kAtmosphere;
  if (net.chambers[node].open_to_air) return kAtmosphere;
  return std::exp(std::clamp(y[node], kLnFloor - 1.0, kLnAtm + 1.0));
}

// Per-chamber load over a chunk with linear temperature T0 + r s:
//   Q(s) = 2^((T(s) - Tref)/d) * [A q_clean + (q_dirty - q_clean) sum_j A_j c_j(s)]
// where every surface shares the same decay factor exp(-decay_exponent).
struct ChunkLoad {
  double t0 = 20.0, r = 0.0;
  double clean = 0.0;  // sum A q_clean
  double dirty = 0.0;  // (q_dirty - q_clean) sum A c at s = 0
  bool exposed = false;
};

struct Rhs {
  const VacuumNetwork& net;
  std::vector<ChunkLoad> loads;
  // Conductances and pump connections are frozen for the chunk; only the
  // turbo derating depends on the instantaneous pressure.
  std::vector<double> path_c;
  mutable std::vector<double> flow;

  double load_at(const ChunkLoad& l, double s) const {
    const auto& m = net.outgassing;
    const double decay = l.exposed ? 1.0 : std::exp(-decay_exponent(l.t0, l.r, s, m));
    return std::exp2((l.t0 + l.r * s - m.ref_temp) / m.temp_doubling) * (l.clean + l.dirty * decay);
  }

  void operator()(const State& y, State& dy, double s) const {
    const std::size_t n = net.chambers.size();
    for (std::size_t i = 0; i < n; ++i) flow[i] = load_at(loads[i], s);
    for (std::size_t k = 0; k < net.paths.size(); ++k) {
      const double c = path_c[k];
      if (c == 0.0) continue;
      const Path& p = net.paths[k];
      const double q = c * (pressure_of(net, p.b, y) - pressure_of(net, p.a, y));
      flow[p.a] += q;
      if (p.b != kAir) flow[p.b] -= q;
    }
    for (const auto& pump : net.pumps) {
      if (pump.state != PumpState::on) continue;
      const double pr = pressure_of(net, pump.chamber, y);
      const double sp = effective_speed(net, pump, pr);
      flow[pump.chamber] -= sp * std::max(pr - pump.base_pressure, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Chamber& ch = net.chambers[i];
      if (ch.open_to_air) {
        dy[i] = 0.0;
        continue;
      }
      // Trial stages may overshoot wildly on a vent; keep them finite so the
      // error estimate rejects the step instead of propagating inf.
      const double yi = std::clamp(y[i], kLnFloor - 1.0, kLnAtm + 1.0);
      double d = flow[i] / (ch.volume * std::exp(yi));
      if ((yi <= kLnFloor && d < 0.0) || (yi >= kLnAtm && d > 0.0)) d = 0.0;
      dy[i] = d;
    }
  }
};

void integrate_chunk(VacuumNetwork& net, double h) {
  const std::size_t n = net.chambers.size();
  State y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = std::log(std::clamp(net.chambers[i].pressure, kPressureFloor, kAtmosphere));

  Rhs rhs{net, {}, {}, std::vector<double>(n)};
  const auto& m = net.outgassing;
  for (const auto& ch : net.chambers) {
    ChunkLoad l;
    l.t0 = ch.temperature;
    l.r = ramp_sign(ch) * ch.ramp_rate;
    l.exposed = ch.open_to_air;
    auto add = [&](const Surface& sf) {
      l.clean += sf.area * m.q_clean;
      l.dirty += sf.area * (l.exposed ? 1.0 : sf.contamination) * (m.q_dirty - m.q_clean);
    };
    add(ch.walls);
    for (const auto& p : ch.payloads) add(p);
    rhs.loads.push_back(l);
  }
  rhs.path_c.reserve(net.paths.size());
  for (const auto& p : net.paths) rhs.path_c.push_back(path_conductance(net, p));

  auto ctl = odeint::make_controlled(net.atol, net.rtol, net.max_step,
                                     odeint::runge_kutta_dopri5<State>());
  double s = 0.0;
  double dt = std::min(net.dt_hint, net.max_step);
  int rejects = 0;
  while (s < h) {
    const bool last = s + dt >= h;
    double trial = last ? h - s : dt;
    const double before = trial;
    if (ctl.try_step(rhs, y, s, trial) == odeint::success) {
      rejects = 0;
      // A step clipped to the chunk end says nothing about the natural size.
      if (!(last && trial >= before)) dt = trial;
      if (last) s = h;
    } else {
      dt = trial;
      if (++rejects > 200 || !(dt > 0.0))
        throw IntegrationFailure("step size underflow at t=" + std::to_string(net.time + s) + " s");
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(y[i]))
        throw IntegrationFailure("pressure in " + net.chambers[i].name + " became non-finite");
  }
  net.dt_hint = dt;

  for (std::size_t i = 0; i < n; ++i) {
    Chamber& ch = net.chambers[i];
    ch.pressure = ch.open_to_air ? kAtmosphere : std::clamp(std::exp(y[i]), kPressureFloor, kAtmosphere);
    const double r = ramp_sign(ch) * ch.ramp_rate;
    auto adv = [&](Surface& sf) {
      sf.contamination = advance_surface(sf.contamination, ch.open_to_air, ch.temperature, r, h, net.outgassing);
      if (!std::isfinite(sf.contamination))
        throw IntegrationFailure("contamination of " + sf.name + " became non-finite");
    };
    adv(ch.walls);
    for (auto& p : ch.payloads) adv(p);
    ch.temperature += r * h;
    if (r != 0.0 && (ch.temperature - ch.temperature_target) * r >= 0.0)
      ch.temperature = ch.temperature_target;
  }
}

void monitor(VacuumNetwork& net, double h) {
  for (auto& pump : net.pumps) {
    if (pump.state != PumpState::on) {
      pump.over_pressure_time = 0.0;
      continue;
    }
    const double pr = net.chambers[pump.chamber].pressure;
    if (pr > pump.trip_pressure) {
      pump.over_pressure_time += h;
      if (pump.over_pressure_time > pump.trip_delay) pump.state = PumpState::tripped;
    } else {
      pump.over_pressure_time = 0.0;
    }
  }
}

}  // namespace

std::string_view to_string(PumpState s) {
  switch (s) {
    case PumpState::off: return "off";
    case PumpState::starting: return "starting";
    case PumpState::on: return "on";
    case PumpState::tripped: return "tripped";
  }
  return "?";
}

VacuumNetwork default_network() {
  VacuumNetwork net;
  Chamber sci;
  sci.name = "science";
  sci.volume = 50.0;
  sci.walls = {"science walls", 1e4, 0.0};
  // The resident cavity, baked in an earlier cycle. Its residual
  // contamination is what puts the science chamber at 3e-10 Torr.
  sci.payloads.push_back({"cavity", 2e3, 4.3e-4});
  sci.pressure = 3e-10;
  Chamber ll;
  ll.name = "loadlock";
  ll.volume = 20.0;
  ll.walls = {"loadlock walls", 6e3, 0.0};
  ll.pressure = 2.7e-10;
  net.chambers = {sci, ll};

  net.valves = {{"gate valve", 100.0, 1.0}, {"angle valve", 5.0, 0.0}};
  net.paths = {{"gate", idx::science, idx::loadlock, 0.0, {idx::gate_valve}, true},
               {"vent", idx::loadlock, kAir, 10.0, {idx::angle_valve}, false}};

  Pump sci_ion;
  sci_ion.name = "science ion pump";
  sci_ion.kind = PumpKind::ion;
  sci_ion.chamber = idx::science;
  sci_ion.nominal_speed = 55.0;
  sci_ion.port_conductance = 1.0 / (1.0 / 40.0 - 1.0 / 55.0);  // 40 L/s at the chamber
  sci_ion.max_start_pressure = 1e-4;
  sci_ion.trip_pressure = 5e-4;
  sci_ion.state = PumpState::on;

  Pump ll_ion = sci_ion;
  ll_ion.name = "loadlock ion pump";
  ll_ion.chamber = idx::loadlock;
  ll_ion.nominal_speed = 40.0;
  ll_ion.port_conductance = 0.0;

  Pump turbo;
  turbo.name = "turbo pump";
  turbo.kind = PumpKind::turbo;
  turbo.chamber = idx::loadlock;
  turbo.nominal_speed = 70.0;
  turbo.derate_pressure = 1e-2;
  turbo.valves = {idx::angle_valve};
  turbo.state = PumpState::off;

  net.pumps = {sci_ion, ll_ion, turbo};
  return net;
}

void validate(const VacuumNetwork& net) {
  const int n = static_cast<int>(net.chambers.size());
  const int nv = static_cast<int>(net.valves.size());
  auto bad = [](const std::string& w) { throw PreconditionError("vacuum network: " + w); };
  if (n == 0) bad("no chambers");
  for (const auto& ch : net.chambers) {
    if (!(ch.volume > 0.0)) bad(ch.name + " volume must be > 0");
    if (ch.walls.area < 0.0) bad(ch.name + " wall area must be >= 0");
    if (!(ch.ramp_rate > 0.0)) bad(ch.name + " ramp rate must be > 0");
    auto surf = [&](const Surface& s) {
      if (s.area < 0.0 || s.contamination < 0.0 || s.contamination > 1.0)
        bad("surface " + s.name + " out of range");
    };
    surf(ch.walls);
    for (const auto& p : ch.payloads) surf(p);
  }
  for (const auto& v : net.valves)
    if (v.conductance < 0.0 || v.fraction < 0.0 || v.fraction > 1.0) bad("valve " + v.name);
  auto check_valves = [&](const std::vector<int>& vs, const std::string& who) {
    for (int v : vs)
      if (v < 0 || v >= nv) bad(who + " references missing valve");
  };
  for (const auto& p : net.paths) {
    if (p.a < 0 || p.a >= n || p.b < kAir || p.b >= n || p.a == p.b) bad("path " + p.name + " endpoints");
    if (p.conductance < 0.0) bad("path " + p.name + " conductance");
    check_valves(p.valves, "path " + p.name);
  }
  for (const auto& p : net.pumps) {
    if (p.chamber < 0 || p.chamber >= n) bad("pump " + p.name + " chamber");
    if (p.nominal_speed < 0.0 || p.port_conductance < 0.0 || p.base_pressure < 0.0)
      bad("pump " + p.name + " parameters");
    check_valves(p.valves, "pump " + p.name);
  }
  const auto& m = net.outgassing;
  if (!(m.q_dirty > m.q_clean && m.q_clean > 0.0)) bad("outgassing requires q_dirty > q_clean > 0");
  if (!(m.bake_time_const_ref > 0.0 && m.temp_doubling > 0.0)) bad("outgassing time constants");
  if (!(net.rtol > 0.0 && net.atol > 0.0 && net.max_step > 0.0 && net.monitor_interval > 0.0))
    bad("integrator tolerances");
}

double outgassing_load(const Surface& s, double temperature, const OutgassingModel& m) {
  return s.area * (m.q_clean + s.contamination * (m.q_dirty - m.q_clean)) *
         std::exp2((temperature - m.ref_temp) / m.temp_doubling);
}

double outgassing_load(const Chamber& ch, const OutgassingModel& m) {
  double q = outgassing_load(ch.walls, ch.temperature, m);
  for (const auto& p : ch.payloads) q += outgassing_load(p, ch.temperature, m);
  return q;
}

double bake_time_constant(double temperature, const OutgassingModel& m) {
  return 1.0 / decay_rate(temperature, m);
}

double series_conductance(const VacuumNetwork& net, double own, std::span<const int> valves) {
  double inv = own > 0.0 ? 1.0 / own : 0.0;
  for (int v : valves) {
    const double c = net.valves[v].conductance * net.valves[v].fraction;
    if (c <= 0.0) return 0.0;
    inv += 1.0 / c;
  }
  return inv > 0.0 ? 1.0 / inv : std::numeric_limits<double>::infinity();
}

double path_conductance(const VacuumNetwork& net, const Path& p) {
  if (!p.enabled) return 0.0;
  const double c = series_conductance(net, p.conductance, p.valves);
  if (std::isinf(c)) throw PreconditionError("path " + p.name + " has no finite conductance");
  return c;
}

double effective_speed(const VacuumNetwork& net, const Pump& p, double pressure) {
  if (p.state != PumpState::on) return 0.0;
  double s = p.nominal_speed;
  if (p.derate_pressure > 0.0) s /= 1.0 + pressure / p.derate_pressure;
  if (s <= 0.0) return 0.0;
  const double c = series_conductance(net, p.port_conductance, p.valves);
  if (c == 0.0) return 0.0;
  return std::isinf(c) ? s : 1.0 / (1.0 / s + 1.0 / c);
}

void step(VacuumNetwork& net, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("step requires finite dt > 0");
  const double t_end = net.time + dt;
  while (net.time < t_end) {
    // Chunks end on the monitor grid, at dt, or where a temperature ramp
    // lands on its target (the ramp is linear within a chunk).
    const double k = std::floor(net.time / net.monitor_interval + 1e-9) + 1.0;
    double next = std::min(t_end, k * net.monitor_interval);
    for (auto& ch : net.chambers) {
      if (ch.temperature == ch.temperature_target) continue;
      const double left = std::fabs(ch.temperature_target - ch.temperature) / ch.ramp_rate;
      if (left < 1e-6) {
        ch.temperature = ch.temperature_target;
        continue;
      }
      next = std::min(next, net.time + left);
    }
    const double h = next - net.time;
    if (h <= 0.0) {
      net.time = next;
      continue;
    }
    integrate_chunk(net, h);
    net.time = next;
    monitor(net, h);
  }
}

double equilibrium_pressure(double load, std::span<const double> speeds,
                            std::span<const double> base_pressures) {
  double s = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    s += speeds[i];
    sb += speeds[i] * (i < base_pressures.size() ? base_pressures[i] : 0.0);
  }
  if (!(s > 0.0)) throw NoEquilibrium("no pumping speed: all pumps off");
  return (load + sb) / s;
}

double equilibrium_pressure(const VacuumNetwork& net, int chamber) {
  std::vector<double> s, b;
  for (const auto& p : net.pumps) {
    if (p.chamber != chamber) continue;
    const double sp = effective_speed(net, p, 0.0);
    if (sp <= 0.0) continue;
    s.push_back(sp);
    b.push_back(p.base_pressure);
  }
  if (s.empty()) throw NoEquilibrium("no running pump on " + net.chambers.at(chamber).name);
  return equilibrium_pressure(outgassing_load(net.chambers[chamber], net.outgassing), s, b);
}

std::vector<double> steady_state(const VacuumNetwork& net) {
  const std::size_t n = net.chambers.size();
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = net.chambers[i].open_to_air ? kAtmosphere : net.chambers[i].pressure;
  // Linear in P apart from turbo derating: a few fixed-point sweeps.
  for (int it = 0; it < 50; ++it) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) a[i][n] = outgassing_load(net.chambers[i], net.outgassing);
    for (const auto& path : net.paths) {
      const double c = path_conductance(net, path);
      if (c == 0.0) continue;
      a[path.a][path.a] += c;
      if (path.b == kAir) {
        a[path.a][n] += c * kAtmosphere;
      } else {
        a[path.a][path.b] -= c;
        a[path.b][path.b] += c;
        a[path.b][path.a] -= c;
      }
    }
    for (const auto& pump : net.pumps) {
      const double s = effective_speed(net, pump, p[pump.chamber]);
      a[pump.chamber][pump.chamber] += s;
      a[pump.chamber][n] += s * pump.base_pressure;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!net.chambers[i].open_to_air) continue;
      std::fill(a[i].begin(), a[i].end(), 0.0);
      a[i][i] = 1.0;
      a[i][n] = kAtmosphere;
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < n; ++r)
        if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
      if (a[piv][c] == 0.0) throw NoEquilibrium("network has an unpumped, isolated chamber");
      std::swap(a[c], a[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
      }
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::clamp(a[i][n] / a[i][i], kPressureFloor, kAtmosphere);
      change = std::max(change, std::fabs(v - p[i]) / v);
      p[i] = v;
    }
    if (change < 1e-14) break;
  }
  return p;
}

GaugeReading gauge_read(const Chamber& ch, std::mt19937_64& rng, bool noise) {
  if (ch.pressure > kGaugeMax) return {kGaugeMax, true};
  if (!noise) return {ch.pressure, false};
  std::normal_distribution<double> gauss(0.0, kGaugeSigma);
  return {ch.pressure * std::exp(gauss(rng)), false};
}

}  // namespace llt::vac
