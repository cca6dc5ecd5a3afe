#include "llt/tof.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "llt/errors.hpp"
#include "llt/rng.hpp"

namespace llt::tof {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);

// Pixel-integrated 1-D Gaussian of unit area and its derivatives with
// respect to center and width.
struct Profile {
  std::vector<double> f, d_center, d_sigma;
};

Profile profile(int n, double origin, double pitch, double center, double sigma, bool derivs) {
  Profile p;
  p.f.resize(n);
  if (derivs) {
    p.d_center.resize(n);
    p.d_sigma.resize(n);
  }
  const double inv = 1.0 / (kSqrt2 * sigma);
  for (int i = 0; i < n; ++i) {
    const double x = origin + i * pitch - center;
    const double up = (x + 0.5 * pitch) * inv;
    const double lo = (x - 0.5 * pitch) * inv;
    p.f[i] = 0.5 * (std::erf(up) - std::erf(lo));
    if (!derivs) continue;
    const double eu = std::exp(-up * up), el = std::exp(-lo * lo);
    p.d_center[i] = (el - eu) * kInvSqrtPi * inv;
    p.d_sigma[i] = (lo * el - up * eu) * kInvSqrtPi / sigma;
  }
  return p;
}

TofImage layout(const ThermalCloud& cloud, double t, const RenderOptions& opt, Vec2 s) {
  if (!(opt.pixel_pitch > 0.0)) throw PreconditionError("pixel pitch must be > 0");
  if (t < 0.0) throw PreconditionError("expansion time must be >= 0");
  TofImage img;
  img.pixel_pitch = opt.pixel_pitch;
  img.expansion_time = t;
  auto axis = [&](int requested, double sigma) {
    if (requested > 0) return requested;
    return 2 * static_cast<int>(std::ceil(opt.grid_sigmas * sigma / opt.pixel_pitch)) + 1;
  };
  img.width = axis(opt.width, s.x);
  img.height = axis(opt.height, s.y);
  if (img.width * opt.pixel_pitch < 6.0 * s.x || img.height * opt.pixel_pitch < 6.0 * s.y)
    throw GridTooSmall("grid spans less than 6 sigma(t)");
  img.origin = {cloud.center.x - 0.5 * (img.width - 1) * opt.pixel_pitch,
                cloud.center.y - 0.5 * (img.height - 1) * opt.pixel_pitch};
  img.counts.assign(static_cast<std::size_t>(img.width) * img.height, 0.0);
  return img;
}

double integrated_counts(const ThermalCloud& cloud, const RenderOptions& opt) {
  const double two_pi = 2.0 * std::numbers::pi;
  return opt.peak_counts * two_pi * cloud.initial_sigma.x * cloud.initial_sigma.y /
         (opt.pixel_pitch * opt.pixel_pitch) * cloud.atom_number / opt.reference_atoms;
}

template <bool Parallel>
TofImage render(const ThermalCloud& cloud, double t, const RenderOptions& opt, std::uint64_t seed) {
  const Vec2 s = expanded_sigma(cloud, t);
  TofImage img = layout(cloud, t, opt, s);
  const double total = integrated_counts(cloud, opt);
  const Profile px = profile(img.width, img.origin.x, img.pixel_pitch, cloud.center.x, s.x, false);
  const Profile py = profile(img.height, img.origin.y, img.pixel_pitch, cloud.center.y, s.y, false);
  const int w = img.width, h = img.height;
  double* out = img.counts.data();
  const bool noise = opt.noise;
  // One RNG substream per row: the parallel and serial paths agree exactly.
#pragma omp parallel for schedule(static) if (Parallel)
  for (int j = 0; j < h; ++j) {
    auto rng = substream(seed, static_cast<std::uint64_t>(j));
    double* row = out + static_cast<std::size_t>(j) * w;
    for (int i = 0; i < w; ++i) {
      const double mean = total * px.f[i] * py.f[j];
      if (!noise) {
        row[i] = mean;
      } else if (mean > 0.0) {
        std::poisson_distribution<long long> pois(mean);
        row[i] = static_cast<double>(pois(rng));
      }
    }
  }
  return img;
}

struct Params {
  double a, x0, y0, sx, sy;
};

struct Model {
  const TofImage& img;

  // Sum of squared residuals, J^T J and J^T r for the separable model.
  double evaluate(const Params& p, Eigen::Matrix<double, 5, 5>* jtj, Eigen::Matrix<double, 5, 1>* jtr) const {
    const bool derivs = jtj != nullptr;
    const Profile X = profile(img.width, img.origin.x, img.pixel_pitch, p.x0, p.sx, derivs);
    const Profile Y = profile(img.height, img.origin.y, img.pixel_pitch, p.y0, p.sy, derivs);
    double cost = 0.0;
    std::vector<double> ry, ryc, rys;
    if (derivs) {
      ry.assign(img.width, 0.0);
      ryc.assign(img.width, 0.0);
      rys.assign(img.width, 0.0);
    }
    for (int j = 0; j < img.height; ++j) {
      const double* row = img.counts.data() + static_cast<std::size_t>(j) * img.width;
      const double gy = p.a * Y.f[j];
      for (int i = 0; i < img.width; ++i) {
        const double r = row[i] - gy * X.f[i];
        cost += r * r;
        if (derivs) {
          ry[i] += r * Y.f[j];
          ryc[i] += r * Y.d_center[j];
          rys[i] += r * Y.d_sigma[j];
        }
      }
    }
    if (!derivs) return cost;
    // Every Jacobian column is an outer product f(x_i) g(y_j), so the normal
    // matrix factorizes into 1-D sums.
    const std::array<const std::vector<double>*, 5> fx{&X.f, &X.d_center, &X.f, &X.d_sigma, &X.f};
    const std::array<const std::vector<double>*, 5> gy{&Y.f, &Y.f, &Y.d_center, &Y.f, &Y.d_sigma};
    const std::array<double, 5> scale{1.0, p.a, p.a, p.a, p.a};
    auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
      double s = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
      return s;
    };
    for (int m = 0; m < 5; ++m)
      for (int n = m; n < 5; ++n) {
        const double v = scale[m] * scale[n] * dot(*fx[m], *fx[n]) * dot(*gy[m], *gy[n]);
        (*jtj)(m, n) = v;
        (*jtj)(n, m) = v;
      }
    const std::array<const std::vector<double>*, 5> rg{&ry, &ry, &ryc, &ry, &rys};
    for (int m = 0; m < 5; ++m) (*jtr)(m) = scale[m] * dot(*fx[m], *rg[m]);
    return cost;
  }
};

Params moments(const TofImage& img) {
  double sum = 0.0, sx = 0.0, sy = 0.0;
  for (int j = 0; j < img.height; ++j)
    for (int i = 0; i < img.width; ++i) {
      const double c = img.at(i, j);
      sum += c;
      sx += c * i;
      sy += c * j;
    }
  const double mi = sx / sum, mj = sy / sum;
  double vx = 0.0, vy = 0.0;
  for (int j = 0; j < img.height; ++j)
    for (int i = 0; i < img.width; ++i) {
      const double c = img.at(i, j);
      vx += c * (i - mi) * (i - mi);
      vy += c * (j - mj) * (j - mj);
    }
  const double p = img.pixel_pitch;
  // Pixel binning adds pitch^2 / 12 to the variance.
  auto width = [p](double v) { return std::sqrt(std::max(v * p * p - p * p / 12.0, p * p / 4.0)); };
  return {sum, img.origin.x + mi * p, img.origin.y + mj * p, width(vx / sum), width(vy / sum)};
}

}  // namespace

double expanded_sigma(double sigma0, double temperature, double t, double mass) {
  if (t < 0.0) throw PreconditionError("expansion time must be >= 0");
  return std::sqrt(sigma0 * sigma0 + phys::kB * temperature / mass * t * t);
}

Vec2 expanded_sigma(const ThermalCloud& cloud, double t) {
  return {expanded_sigma(cloud.initial_sigma.x, cloud.temperature, t, cloud.mass),
          expanded_sigma(cloud.initial_sigma.y, cloud.temperature, t, cloud.mass)};
}

double TofImage::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

TofImage render_image(const ThermalCloud& cloud, double t, const RenderOptions& opt, std::uint64_t seed) {
  return render<true>(cloud, t, opt, seed);
}

TofImage render_image_serial(const ThermalCloud& cloud, double t, const RenderOptions& opt,
                             std::uint64_t seed) {
  return render<false>(cloud, t, opt, seed);
}

SpotFit extract_sigma(const TofImage& img, const FitOptions& opt) {
  if (img.width <= 0 || img.height <= 0 || img.counts.size() != static_cast<std::size_t>(img.width) * img.height)
    throw DegenerateImage("image has no pixels");
  double lo = img.counts[0], hi = img.counts[0];
  for (double c : img.counts) {
    if (!std::isfinite(c) || c < 0.0) throw DegenerateImage("image has negative or non-finite counts");
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  if (hi <= 0.0) throw DegenerateImage("image is all zeros");
  if (hi == lo) throw DegenerateImage("image is flat");

  Model model{img};
  Params p = moments(img);
  Eigen::Matrix<double, 5, 5> jtj;
  Eigen::Matrix<double, 5, 1> jtr;
  double cost = model.evaluate(p, &jtj, &jtr);
  double lambda = 1e-3;
  std::vector<std::string> trace;
  char line[160];
  for (int it = 1; it <= opt.max_iterations; ++it) {
    Eigen::Matrix<double, 5, 5> a = jtj;
    for (int k = 0; k < 5; ++k) a(k, k) += lambda * jtj(k, k);
    const Eigen::Matrix<double, 5, 1> d = a.ldlt().solve(jtr);
    const Params trial{p.a + d(0), p.x0 + d(1), p.y0 + d(2), p.sx + d(3), p.sy + d(4)};
    const std::array<double, 5> scale{std::fabs(p.a), std::max(std::fabs(p.x0), p.sx),
                                      std::max(std::fabs(p.y0), p.sy), p.sx, p.sy};
    double rel = 0.0;
    for (int k = 0; k < 5; ++k) rel = std::max(rel, std::fabs(d(k)) / scale[k]);
    const bool valid = trial.a > 0.0 && trial.sx > 0.0 && trial.sy > 0.0 && d.allFinite();
    const double c_trial = valid ? model.evaluate(trial, nullptr, nullptr) : HUGE_VAL;
    std::snprintf(line, sizeof line, "iter %d cost %.6e trial %.6e lambda %.1e step %.3e", it, cost,
                  c_trial, lambda, rel);
    trace.emplace_back(line);
    if (valid && c_trial <= cost) {
      p = trial;
      cost = model.evaluate(p, &jtj, &jtr);
      lambda = std::max(lambda * 0.1, 1e-12);
      if (rel < opt.step_tolerance) {
        return {p.sx, p.sy, {p.x0, p.y0}, p.a, std::sqrt(cost), it};
      }
    } else {
      // At the minimum to rounding: further damping only shrinks the step.
      if (valid && rel < opt.step_tolerance) return {p.sx, p.sy, {p.x0, p.y0}, p.a, std::sqrt(cost), it};
      lambda *= 10.0;
    }
  }
  throw NonConvergence("spot fit did not converge in " + std::to_string(opt.max_iterations) + " iterations",
                       std::move(trace));
}

TemperatureFit fit_temperature(const std::vector<Sample>& samples, double mass, double confidence) {
  const std::size_t n = samples.size();
  if (n < 3) throw PreconditionError("temperature fit needs at least 3 samples");
  bool distinct = false;
  for (const auto& s : samples) {
    if (!std::isfinite(s.t) || !std::isfinite(s.sigma)) throw PreconditionError("non-finite sample");
    if (s.t != samples[0].t) distinct = true;
  }
  if (!distinct) throw PreconditionError("temperature fit needs at least 2 distinct times");

  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += s.t * s.t;
    my += s.sigma * s.sigma;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& s : samples) {
    const double dx = s.t * s.t - mx;
    sxx += dx * dx;
    sxy += dx * (s.sigma * s.sigma - my);
  }
  TemperatureFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (f.slope < 0.0) throw NonPhysicalFit("negative slope of sigma^2 vs t^2", f.slope);
  double ssr = 0.0;
  for (const auto& s : samples) {
    const double r = s.sigma * s.sigma - (f.intercept + f.slope * s.t * s.t);
    ssr += r * r;
  }
  f.dof = static_cast<int>(n) - 2;
  const double s2 = ssr / f.dof;
  const double se_b = std::sqrt(s2 / sxx);
  const double se_a = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  const double to_t = mass / phys::kB;
  f.temperature = f.slope * to_t;
  f.sigma0 = std::sqrt(std::max(f.intercept, 0.0));
  f.temperature_stderr = se_b * to_t;
  f.sigma0_squared_stderr = se_a;
  f.confidence = confidence;
  const boost::math::students_t dist(f.dof);
  const double q = boost::math::quantile(dist, 0.5 + 0.5 * confidence);
  f.temperature_ci_low = (f.slope - q * se_b) * to_t;
  f.temperature_ci_high = (f.slope + q * se_b) * to_t;
  f.sigma0_ci_low = std::sqrt(std::max(f.intercept - q * se_a, 0.0));
  f.sigma0_ci_high = std::sqrt(std::max(f.intercept + q * se_a, 0.0));
  return f;
}

std::vector<double> default_times() {
  std::vector<double> t(8);
  for (int k = 0; k < 8; ++k) t[k] = 20e-3 * k / 7.0;
  return t;
}

SyntheticRun synthetic_run(const ThermalCloud& cloud, const std::vector<double>& times,
                           const RenderOptions& opt, std::uint64_t seed) {
  SyntheticRun run;
  run.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const TofImage img = render_image(cloud, times[k], opt, splitmix64(seed + k));
    const SpotFit spot = extract_sigma(img);
    run.spots.push_back(spot);
    run.samples.push_back({times[k], spot.sigma_x});
    run.samples.push_back({times[k], spot.sigma_y});
  }
  run.fit = fit_temperature(run.samples, cloud.mass);
  return run;
}

void write_pgm(const TofImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PreconditionError("cannot write " + path);
  char meta[256];
  std::snprintf(meta, sizeof meta, "# llt pitch_m=%.17g expansion_time_s=%.17g origin_x_m=%.17g origin_y_m=%.17g",
                img.pixel_pitch, img.expansion_time, img.origin.x, img.origin.y);
  out << "P5\n" << meta << "\n" << img.width << " " << img.height << "\n65535\n";
  for (double c : img.counts) {
    const auto v = static_cast<unsigned>(std::clamp(std::lround(c), 0L, 65535L));
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xFF));
  }
  if (!out) throw PreconditionError("short write to " + path);
}

TofImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + path);
  TofImage img;
  auto token = [&]() {
    std::string tok;
    while (in) {
      const int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
        double pitch, t, ox, oy;
        if (std::sscanf(comment.c_str(), "# llt pitch_m=%lg expansion_time_s=%lg origin_x_m=%lg origin_y_m=%lg",
                        &pitch, &t, &ox, &oy) == 4) {
          img.pixel_pitch = pitch;
          img.expansion_time = t;
          img.origin = {ox, oy};
        }
      } else if (std::isspace(c)) {
        in.get();
        if (!tok.empty()) return tok;
      } else if (c == EOF) {
        break;
      } else {
        tok.push_back(static_cast<char>(in.get()));
      }
    }
    return tok;
  };
  if (token() != "P5") throw PreconditionError(path + " is not a binary PGM");
  img.width = std::stoi(token());
  img.height = std::stoi(token());
  const int maxval = std::stoi(token());
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
    throw PreconditionError(path + ": bad PGM header");
  const bool wide = maxval > 255;
  img.counts.resize(static_cast<std::size_t>(img.width) * img.height);
  for (auto& c : img.counts) {
    int v = in.get();
    if (wide) v = (v << 8) | in.get();
    if (!in) throw PreconditionError(path + ": truncated pixel data");
    c = v;
  }
  return img;
}

}  // namespace llt::tof
