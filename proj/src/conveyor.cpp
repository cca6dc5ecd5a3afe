#include "llt/conveyor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <string>

#include "llt/errors.hpp"
#include "llt/rng.hpp"

namespace llt::conveyor {

using phys::kB;
using phys::pi;

LatticeConfig default_lattice() {
  LatticeConfig cfg;
  cfg.lattice_depth_override = kB * 38e-6;
  return cfg;
}

void validate(const LatticeConfig& cfg) {
  for (const auto* b : {&cfg.beam_up, &cfg.beam_down}) {
    if (!(b->power >= 0.0)) throw PreconditionError("beam power must be >= 0");
    if (!(b->waist > 0.0)) throw PreconditionError("beam waist must be > 0");
    if (!(b->wavelength > 0.0)) throw PreconditionError("beam wavelength must be > 0");
  }
  if (cfg.beam_up.wavelength != cfg.beam_down.wavelength)
    throw PreconditionError("lattice beams must share one wavelength");
  if (!(std::fabs(cfg.detuning_offset) <= kMaxDetuningOffset))
    throw PreconditionError("detuning offset exceeds the 2 MHz AOM envelope");
  if (cfg.lattice_depth_override && !(*cfg.lattice_depth_override >= 0.0))
    throw PreconditionError("lattice depth override must be >= 0");
  if (!(cfg.heating_rate >= 0.0)) throw PreconditionError("heating rate must be >= 0");
}

DipoleDepth dipole_depth(const LatticeConfig& cfg, const phys::LineData& line) {
  validate(cfg);
  const double lambda = cfg.beam_up.wavelength;
  for (double l0 : {line.lambda_d1, line.lambda_d2})
    if (std::fabs(lambda - l0) < 0.1e-9)
      throw ResonanceError("lattice wavelength within 0.1 nm of a D line");

  const auto peak = [](const GaussianBeam& b) { return 2.0 * b.power / (pi * b.waist * b.waist); };
  const double amp = std::sqrt(peak(cfg.beam_up)) + std::sqrt(peak(cfg.beam_down));
  const double intensity = amp * amp;  // 4 I0 for balanced beams

  const double omega = 2.0 * pi * phys::c / lambda;
  const double w1 = 2.0 * pi * phys::c / line.lambda_d1;
  const double w2 = 2.0 * pi * phys::c / line.lambda_d2;
  const double u = 0.5 * pi * phys::c * phys::c * line.gamma *
                   (2.0 / (w2 * w2 * w2 * (omega - w2)) + 1.0 / (w1 * w1 * w1 * (omega - w1))) *
                   intensity;
  DipoleDepth d;
  d.joules = std::fabs(u);
  d.microkelvin = d.joules / kB * 1e6;
  d.hertz = d.joules / phys::h;
  d.attractive = u <= 0.0;
  return d;
}

double operating_depth(const LatticeConfig& cfg, const phys::LineData& line) {
  if (cfg.lattice_depth_override) {
    validate(cfg);
    return *cfg.lattice_depth_override;
  }
  return dipole_depth(cfg, line).joules;
}

double axial_frequency(double depth, double wavelength, double mass) {
  if (!(depth >= 0.0)) throw PreconditionError("axial_frequency: depth must be >= 0");
  const double k = 2.0 * pi / wavelength;
  return k * std::sqrt(2.0 * depth / mass) / (2.0 * pi);
}

double lattice_velocity(double detuning_offset, double wavelength) {
  return detuning_offset * wavelength / 2.0;
}

double critical_acceleration(double depth, double wavelength, double mass) {
  if (!(depth >= 0.0)) throw PreconditionError("critical_acceleration: depth must be >= 0");
  return depth * (2.0 * pi / wavelength) / mass;
}

// ---------------------------------------------------------------------------
// Plans

namespace {

const Segment* find_segment(const std::vector<Segment>& p, double t) {
  if (p.empty()) return nullptr;
  auto it = std::upper_bound(p.begin(), p.end(), t,
                             [](double tt, const Segment& s) { return tt < s.t1; });
  if (it == p.end()) return &p.back();
  return &*it;
}

double seg_position(const Segment& s, double t) {
  const double tau = t - s.t0;
  const double span = s.t1 - s.t0;
  const double acc = span > 0.0 ? (s.v1 - s.v0) / span : 0.0;
  return s.z0 + s.v0 * tau + 0.5 * acc * tau * tau;
}

}  // namespace

double TransportPlan::velocity_at(double t) const {
  const Segment* s = find_segment(profile, t);
  if (!s) return 0.0;
  if (t >= s->t1) return s->v1;
  if (t <= s->t0) return s->v0;
  return s->v0 + (s->v1 - s->v0) * (t - s->t0) / (s->t1 - s->t0);
}

double TransportPlan::position_at(double t) const {
  const Segment* s = find_segment(profile, t);
  if (!s) return 0.0;
  if (t <= s->t1) return seg_position(*s, std::max(t, s->t0));
  return seg_position(*s, s->t1) + s->v1 * (t - s->t1);
}

double TransportPlan::acceleration_at(double t) const {
  const Segment* s = find_segment(profile, t);
  if (!s || t < 0.0 || t > duration) return 0.0;
  const double span = s->t1 - s->t0;
  return span > 0.0 ? (s->v1 - s->v0) / span : 0.0;
}

double TransportPlan::integrated_distance() const {
  double z = 0.0;
  for (const auto& s : profile) z += 0.5 * (s.v0 + s.v1) * (s.t1 - s.t0);
  return z;
}

TransportPlan TransportPlan::stationary(double duration) {
  return constant_velocity(0.0, duration);
}

TransportPlan TransportPlan::constant_velocity(double velocity, double duration) {
  if (!(duration > 0.0)) throw PreconditionError("plan duration must be > 0");
  TransportPlan p;
  p.duration = duration;
  p.distance = velocity * duration;
  p.v_max = std::fabs(velocity);
  p.a_max = 0.0;
  p.profile.push_back({0.0, duration, velocity, velocity, 0.0});
  return p;
}

namespace {

// Segment boundaries rounded up so the slope |dv| / (t1 - t0) of each ramp,
// as computed from the stored boundaries, never exceeds a_max.
void round_up_ramps(std::vector<Segment>& profile, double a_max) {
  for (std::size_t k = 0; k < profile.size(); ++k) {
    Segment& sg = profile[k];
    const double dv = std::fabs(sg.v1 - sg.v0);
    while (dv / (sg.t1 - sg.t0) > a_max) sg.t1 = std::nextafter(sg.t1, INFINITY);
    if (k + 1 < profile.size()) profile[k + 1].t0 = sg.t1;
  }
}

}  // namespace

TransportPlan plan_transport(double distance, double v_max, double a_max) {
  if (!(distance > 0.0) || !(v_max > 0.0) || !(a_max > 0.0))
    throw PreconditionError("plan_transport: distance, v_max and a_max must be > 0");
  TransportPlan p;
  p.distance = distance;
  p.v_max = v_max;
  p.a_max = a_max;
  const double ramp_distance = v_max * v_max / a_max;
  if (distance > ramp_distance) {
    const double ta = v_max / a_max;
    const double tc = (distance - ramp_distance) / v_max;
    const double d_ramp = 0.5 * v_max * ta;
    p.profile = {{0.0, ta, 0.0, v_max, 0.0},
                 {ta, ta + tc, v_max, v_max, d_ramp},
                 {ta + tc, 2 * ta + tc, v_max, 0.0, d_ramp + v_max * tc}};
  } else {
    const double vp = std::sqrt(distance * a_max);
    const double ta = vp / a_max;
    p.profile = {{0.0, ta, 0.0, vp, 0.0}, {ta, 2 * ta, vp, 0.0, 0.5 * vp * ta}};
  }
  round_up_ramps(p.profile, a_max);
  p.duration = p.profile.back().t1;
  return p;
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

struct Setup {
  double depth;     // J at focus
  double k;         // 1/m
  double mass;
  double focus;     // m
  double rayleigh;  // m
  bool divergence;
  double dt;
  std::uint64_t steps;
  double heating_rate;
  double temperature;
  bool bound_only;
  int energy_window;
  double carry_tolerance;
  std::vector<Segment> profile;
  double a_crit;          // depth * k / mass
  double inv_rayleigh;
  double inv_k_rayleigh;  // 1 / (k z_R)
  std::vector<std::uint64_t> trace_steps;
  double v_lat_start;
  double v_lat_end;
};

struct Outcome {
  double z = 0, v = 0;
  bool survived = false;
  double gain = 0;
  double drift = 0;
  std::vector<unsigned char> bound_at_trace;
};

inline double depth_factor(const Setup& s, double z) {
  if (!s.divergence) return 1.0;
  const double u = (z - s.focus) / s.rayleigh;
  return 1.0 / (1.0 + u * u);
}

// sin on [-pi/2, pi/2]: odd Taylor series through x^21, truncation < 1e-17.
// Inlined polynomial so the lane loop vectorizes without libm calls.
inline double sin_folded(double x) {
  const double x2 = x * x;
  double p = -1.9572941063391263e-20;  // -1/21!
  p = p * x2 + 8.2206352466243295e-18;
  p = p * x2 - 2.8114572543455206e-15;
  p = p * x2 + 7.6471637318198164e-13;
  p = p * x2 - 1.6059043836821613e-10;
  p = p * x2 + 2.5052108385441720e-08;
  p = p * x2 - 2.7557319223985893e-06;
  p = p * x2 + 1.9841269841269841e-04;
  p = p * x2 - 8.3333333333333333e-03;
  p = p * x2 + 1.6666666666666667e-01;
  return x - x * x2 * p;
}

inline double acceleration(const Setup& s, double z, double zl) {
  const double phase = 2.0 * s.k * (z - zl);
  // Round-to-nearest via the 1.5 * 2^52 shift, then fold into [-pi/2, pi/2].
  constexpr double shift = 6755399441055744.0;
  const double turns = phase * (0.5 / pi);
  const double reduced = phase - 2.0 * pi * ((turns + shift) - shift);
  const double mag = std::fabs(reduced);
  const double sn = sin_folded(std::copysign(std::min(mag, pi - mag), reduced));
  // Without divergence inv_rayleigh is 0, so u = 0 and g = 1.
  const double u = (z - s.focus) * s.inv_rayleigh;
  const double g = 1.0 / (1.0 + u * u);
  // |cos| from sin, sign from the reduced phase.
  const double c2 = 1.0 - sn * sn;
  const double cs = std::copysign(std::sqrt(std::max(c2, 0.0)), 0.5 * pi - mag);
  // a_crit * (g' / k) * cos^2 - a_crit * g * sin(2 k zeta)
  return s.a_crit * g * (-u * g * s.inv_k_rayleigh * (1.0 + cs) - sn);
}

// Energy in the frame moving with the lattice; < 0 means bound.
inline double frame_energy(const Setup& s, double z, double v, double zl, double vl) {
  const double c = std::cos(s.k * (z - zl));
  return 0.5 * s.mass * (v - vl) * (v - vl) - s.depth * depth_factor(s, z) * c * c;
}

Setup prepare(const LatticeConfig& cfg, const TransportPlan& plan, double temperature,
              int n_atoms, const TransportOptions& opt) {
  validate(cfg);
  if (n_atoms < 1) throw PreconditionError("simulate_transport: need at least one atom");
  if (!(temperature >= 0.0)) throw PreconditionError("simulate_transport: temperature must be >= 0");
  if (plan.profile.empty() || !(plan.duration > 0.0))
    throw PreconditionError("simulate_transport: plan has no profile");
  if (!(opt.carry_tolerance > 0.0))
    throw PreconditionError("simulate_transport: carry tolerance must be > 0");
  if (opt.steps_per_period < 20)
    throw PreconditionError("simulate_transport: dt too coarse (need dt <= 1/(20 f_ax))");

  Setup s;
  s.depth = operating_depth(cfg, opt.line);
  if (!(s.depth > 0.0)) throw PreconditionError("simulate_transport: lattice depth must be > 0");
  const double lambda = cfg.beam_up.wavelength;
  s.k = 2.0 * pi / lambda;
  s.mass = opt.line.mass;
  s.focus = cfg.beam_up.focus_position;
  s.rayleigh = pi * cfg.beam_up.waist * cfg.beam_up.waist / lambda;
  s.divergence = opt.beam_divergence;
  s.a_crit = s.depth * s.k / s.mass;
  s.inv_rayleigh = s.divergence ? 1.0 / s.rayleigh : 0.0;
  s.inv_k_rayleigh = 1.0 / (s.k * s.rayleigh);
  s.heating_rate = cfg.heating_rate;
  s.temperature = temperature;
  s.bound_only = opt.bound_only;

  const double f_ax = axial_frequency(s.depth, lambda, s.mass);
  s.steps = static_cast<std::uint64_t>(std::ceil(plan.duration * f_ax * opt.steps_per_period));
  s.steps = std::max<std::uint64_t>(s.steps, 1);
  s.dt = plan.duration / static_cast<double>(s.steps);
  s.energy_window = std::min<int>(opt.energy_window, static_cast<int>(s.steps / 2));
  s.carry_tolerance = opt.carry_tolerance;

  s.profile = plan.profile;
  for (int j = 0; j < opt.trace_points; ++j) {
    const double frac = opt.trace_points == 1 ? 1.0 : static_cast<double>(j) / (opt.trace_points - 1);
    s.trace_steps.push_back(static_cast<std::uint64_t>(std::llround(frac * static_cast<double>(s.steps))));
  }
  s.v_lat_start = plan.velocity_at(0.0);
  s.v_lat_end = plan.velocity_at(plan.duration);
  return s;
}

// Walks the plan segments in step order; avoids per-atom lookups.
class LatticeCursor {
 public:
  explicit LatticeCursor(const std::vector<Segment>& profile) : p_(profile) {}
  void seek(double t) {
    while (idx_ + 1 < p_.size() && t > p_[idx_].t1) ++idx_;
    const Segment& sg = p_[idx_];
    const double span = sg.t1 - sg.t0;
    const double acc = span > 0.0 ? (sg.v1 - sg.v0) / span : 0.0;
    if (t <= sg.t1) {
      const double tau = std::max(t - sg.t0, 0.0);
      z_ = sg.z0 + sg.v0 * tau + 0.5 * acc * tau * tau;
      v_ = sg.v0 + acc * tau;
    } else {
      z_ = sg.z0 + 0.5 * (sg.v0 + sg.v1) * span + sg.v1 * (t - sg.t1);
      v_ = sg.v1;
    }
  }
  double z() const { return z_; }
  double v() const { return v_; }

 private:
  const std::vector<Segment>& p_;
  std::size_t idx_ = 0;
  double z_ = 0.0, v_ = 0.0;
};

// The standing wave fills the whole beam, so an atom that slipped out and
// came to rest elsewhere can end up bound in some well. It only counts as
// transported if it stayed with the well it started in.
inline bool carried(const Setup& s, double slip) { return std::fabs(slip) <= s.carry_tolerance; }

constexpr int kBlock = 8;

// Integrates up to kBlock atoms in lockstep; independent lanes give the CPU
// instruction-level parallelism across the otherwise serial Verlet chain.
// Unused lanes replay lane 0 and are discarded.
void run_block(const Setup& s, std::uint64_t seed, std::uint64_t first, int count, Outcome* out) {
  LatticeCursor lattice(s.profile);
  lattice.seek(0.0);
  const double z_start = lattice.z();
  const double local_depth = s.depth * depth_factor(s, z_start);
  const double omega = s.k * std::sqrt(2.0 * local_depth / s.mass);
  const double sigma_v = std::sqrt(kB * s.temperature / s.mass);
  const double sigma_z = sigma_v / omega;

  std::array<std::mt19937_64, kBlock> rng;
  std::normal_distribution<double> gauss(0.0, 1.0);
  double z[kBlock], v[kBlock], a[kBlock], offset0[kBlock], e_rel0[kBlock], e_first[kBlock], e_last[kBlock];
  for (int b = 0; b < kBlock; ++b) {
    const int lane = b < count ? b : 0;
    rng[b] = substream(seed, first + static_cast<std::uint64_t>(lane));
    gauss.reset();
    for (int attempt = 0;; ++attempt) {
      z[b] = z_start + sigma_z * gauss(rng[b]);
      v[b] = s.v_lat_start + sigma_v * gauss(rng[b]);
      if (!s.bound_only || frame_energy(s, z[b], v[b], z_start, s.v_lat_start) < 0.0) break;
      if (attempt > 10000)
        throw PreconditionError("simulate_transport: temperature too high to sample bound atoms");
    }
    offset0[b] = z[b] - z_start;
    e_rel0[b] = frame_energy(s, z[b], v[b], z_start, s.v_lat_start) + s.depth * depth_factor(s, z[b]);
    e_first[b] = e_last[b] = 0.0;
  }
  for (int b = 0; b < count; ++b) out[b].bound_at_trace.assign(s.trace_steps.size(), 0);

  const double dt = s.dt;
  const double kick = s.heating_rate > 0.0 ? std::sqrt(2.0 * s.heating_rate * dt / s.mass) : 0.0;
  const std::uint64_t w = static_cast<std::uint64_t>(std::max(s.energy_window, 0));
  std::size_t next_trace = 0;

  const auto observe = [&](std::uint64_t i) {
    while (next_trace < s.trace_steps.size() && s.trace_steps[next_trace] == i) {
      for (int b = 0; b < count; ++b)
        out[b].bound_at_trace[next_trace] =
            carried(s, z[b] - lattice.z() - offset0[b]) &&
            frame_energy(s, z[b], v[b], lattice.z(), lattice.v()) < 0.0;
      ++next_trace;
    }
    if (w == 0) return;
    if (i < w)
      for (int b = 0; b < count; ++b) e_first[b] += frame_energy(s, z[b], v[b], lattice.z(), lattice.v());
    if (i > s.steps - w)
      for (int b = 0; b < count; ++b) e_last[b] += frame_energy(s, z[b], v[b], lattice.z(), lattice.v());
  };

  observe(0);
  for (int b = 0; b < kBlock; ++b) a[b] = acceleration(s, z[b], lattice.z());
  for (std::uint64_t i = 1; i <= s.steps; ++i) {
    for (int b = 0; b < kBlock; ++b) {
      v[b] += 0.5 * dt * a[b];
      z[b] += dt * v[b];
    }
    lattice.seek(static_cast<double>(i) * dt);
    const double zl = lattice.z();
    for (int b = 0; b < kBlock; ++b) {
      a[b] = acceleration(s, z[b], zl);
      v[b] += 0.5 * dt * a[b];
    }
    if (kick > 0.0)
      for (int b = 0; b < kBlock; ++b) v[b] += kick * gauss(rng[b]);
    observe(i);
  }

  for (int b = 0; b < count; ++b) {
    if (!std::isfinite(z[b]) || !std::isfinite(v[b]))
      throw IntegrationFailure("simulate_transport: non-finite trajectory for atom " +
                               std::to_string(first + static_cast<std::uint64_t>(b)));
    const double e_end = frame_energy(s, z[b], v[b], lattice.z(), s.v_lat_end);
    out[b].z = z[b];
    out[b].v = v[b];
    out[b].survived = e_end < 0.0 && carried(s, z[b] - lattice.z() - offset0[b]);
    out[b].gain = e_end + s.depth * depth_factor(s, z[b]) - e_rel0[b];
    if (w > 0) out[b].drift = std::fabs(e_last[b] - e_first[b]) / static_cast<double>(w);
  }
}

TransportResult reduce(const Setup& s, const std::vector<Outcome>& atoms) {
  TransportResult r;
  r.depth = s.depth;
  r.dt = s.dt;
  r.steps = s.steps;
  std::size_t survivors = 0;
  double gain_sum = 0.0, gain_all = 0.0;
  std::vector<std::size_t> bound(s.trace_steps.size(), 0);
  r.final_sample.reserve(atoms.size());
  for (const auto& o : atoms) {
    r.final_sample.push_back({o.z, o.v});
    gain_all += o.gain;
    if (o.survived) {
      ++survivors;
      gain_sum += o.gain;
    }
    r.max_energy_drift = std::max(r.max_energy_drift, o.drift);
    for (std::size_t j = 0; j < bound.size(); ++j) bound[j] += o.bound_at_trace[j];
  }
  const double n = static_cast<double>(atoms.size());
  r.survival_fraction = static_cast<double>(survivors) / n;
  r.mean_energy_gain = survivors > 0 ? gain_sum / static_cast<double>(survivors) : gain_all / n;
  for (std::size_t j = 0; j < bound.size(); ++j) {
    const std::uint64_t i = s.trace_steps[j];
    LatticeCursor lattice(s.profile);
    lattice.seek(static_cast<double>(i) * s.dt);
    r.trace.push_back({static_cast<double>(i) * s.dt, lattice.z(), static_cast<double>(bound[j]) / n});
  }
  return r;
}

}  // namespace

TransportResult simulate_transport_serial(const LatticeConfig& cfg, const TransportPlan& plan,
                                          double temperature, int n_atoms, std::uint64_t seed,
                                          const TransportOptions& opt) {
  const Setup s = prepare(cfg, plan, temperature, n_atoms, opt);
  std::vector<Outcome> atoms(static_cast<std::size_t>(n_atoms));
  for (int first = 0; first < n_atoms; first += kBlock)
    run_block(s, seed, static_cast<std::uint64_t>(first), std::min(kBlock, n_atoms - first),
              atoms.data() + first);
  return reduce(s, atoms);
}

TransportResult simulate_transport(const LatticeConfig& cfg, const TransportPlan& plan,
                                   double temperature, int n_atoms, std::uint64_t seed,
                                   const TransportOptions& opt) {
  const Setup s = prepare(cfg, plan, temperature, n_atoms, opt);
  std::vector<Outcome> atoms(static_cast<std::size_t>(n_atoms));
  std::exception_ptr failure;
  const int blocks = (n_atoms + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic, 1)
  for (int blk = 0; blk < blocks; ++blk) {
    const int first = blk * kBlock;
    try {
      run_block(s, seed, static_cast<std::uint64_t>(first), std::min(kBlock, n_atoms - first),
                atoms.data() + first);
    } catch (...) {
#pragma omp critical(llt_transport_failure)
      {
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reduce(s, atoms);
}

}  // namespace llt::conveyor
