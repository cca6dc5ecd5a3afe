#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "llt/constants.hpp"
#include "llt/errors.hpp"
#include "llt/tof.hpp"

using namespace llt;
using namespace llt::tof;

namespace {

RenderOptions noiseless() {
  RenderOptions o;
  o.noise = false;
  return o;
}

std::vector<Sample> exact_samples(double temperature, double sigma0) {
  std::vector<Sample> s;
  for (double t : default_times()) s.push_back({t, expanded_sigma(sigma0, temperature, t)});
  return s;
}

}  // namespace

TEST_CASE("ballistic expansion law") {
  CHECK(expanded_sigma(200e-6, 10e-6, 0.0) == 200e-6);
  CHECK(expanded_sigma(0.0, 10e-6, 10e-3) == doctest::Approx(309.3e-6).epsilon(1e-4));
  for (double t : {0.0, 5e-3, 20e-3}) CHECK(expanded_sigma(150e-6, 0.0, t) == 150e-6);
  ThermalCloud c;
  c.initial_sigma = {100e-6, 250e-6};
  const Vec2 s = expanded_sigma(c, 8e-3);
  CHECK(s.x == expanded_sigma(100e-6, c.temperature, 8e-3));
  CHECK(s.y == expanded_sigma(250e-6, c.temperature, 8e-3));
}

TEST_CASE("noiseless image peaks at the center pixel") {
  const auto img = render_image(ThermalCloud{}, 10e-3, noiseless(), 1);
  const auto it = std::max_element(img.counts.begin(), img.counts.end());
  const auto k = static_cast<int>(it - img.counts.begin());
  CHECK(k % img.width == img.width / 2);
  CHECK(k / img.width == img.height / 2);
  for (double c : img.counts) CHECK((c >= 0.0 && std::isfinite(c)));
}

TEST_CASE("integrated counts are conserved during expansion") {
  const ThermalCloud cloud;
  const double ref = render_image(cloud, 0.0, noiseless(), 0).total();
  for (double t : default_times()) {
    CHECK(render_image(cloud, t, noiseless(), 0).total() == doctest::Approx(ref).epsilon(1e-4));
    const double noisy = render_image(cloud, t, RenderOptions{}, 17 + static_cast<int>(t * 1e4)).total();
    CHECK(std::fabs(noisy - ref) <= 5 * std::sqrt(ref));
  }
  // Peak pixel of the t = 0 reference frame is the configured count.
  const auto img0 = render_image(cloud, 0.0, noiseless(), 0);
  CHECK(*std::max_element(img0.counts.begin(), img0.counts.end()) == doctest::Approx(2000.0).epsilon(0.02));
}

TEST_CASE("second moment of a noiseless image equals sigma(t) within half a pixel") {
  const ThermalCloud cloud;
  for (double t : {0.0, 10e-3, 20e-3}) {
    const auto img = render_image(cloud, t, noiseless(), 0);
    double sum = 0.0, mx = 0.0, mxx = 0.0;
    for (int j = 0; j < img.height; ++j)
      for (int i = 0; i < img.width; ++i) {
        const double x = img.origin.x + i * img.pixel_pitch;
        sum += img.at(i, j);
        mx += img.at(i, j) * x;
        mxx += img.at(i, j) * x * x;
      }
    const double var = mxx / sum - (mx / sum) * (mx / sum);
    CHECK(std::fabs(std::sqrt(var) - expanded_sigma(cloud, t).x) <= 0.5 * img.pixel_pitch);
  }
}

TEST_CASE("noiseless round trip recovers a 300 um spot") {
  ThermalCloud cloud;
  cloud.initial_sigma = {300e-6, 300e-6};
  const auto img = render_image(cloud, 0.0, noiseless(), 0);
  const auto fit = extract_sigma(img);
  CHECK(fit.sigma_x == doctest::Approx(300e-6).epsilon(0.005));
  CHECK(fit.sigma_y == doctest::Approx(300e-6).epsilon(0.005));
  CHECK(fit.residual_norm <= 1e-9 * img.total());
  // Amplitude is the untruncated integral; the grid stops at +/- 4 sigma.
  const double full = 2000.0 * 2 * phys::pi * 300e-6 * 300e-6 / (40e-6 * 40e-6);
  CHECK(fit.amplitude == doctest::Approx(full).epsilon(1e-9));
  CHECK(img.total() < full);
}

TEST_CASE("a whole-pixel shift moves only the fitted center") {
  ThermalCloud cloud;
  const auto opt = RenderOptions{};
  const auto base = extract_sigma(render_image(cloud, 5e-3, opt, 3));
  // Same pixel values on a grid moved by one pitch.
  auto moved = render_image(cloud, 5e-3, opt, 3);
  moved.origin.x += moved.pixel_pitch;
  const auto fit = extract_sigma(moved);
  CHECK(fit.center.x - base.center.x == doctest::Approx(moved.pixel_pitch).epsilon(1e-6));
  CHECK(fit.sigma_x == doctest::Approx(base.sigma_x).epsilon(1e-3));
  CHECK(fit.sigma_y == doctest::Approx(base.sigma_y).epsilon(1e-3));
}

TEST_CASE("degenerate images and small grids") {
  TofImage zeros;
  zeros.width = zeros.height = 21;
  zeros.counts.assign(21 * 21, 0.0);
  CHECK_THROWS_AS(extract_sigma(zeros), DegenerateImage);
  auto flat = zeros;
  std::fill(flat.counts.begin(), flat.counts.end(), 5.0);
  CHECK_THROWS_AS(extract_sigma(flat), DegenerateImage);

  RenderOptions tiny = noiseless();
  tiny.width = tiny.height = 11;
  CHECK_THROWS_AS(render_image(ThermalCloud{}, 20e-3, tiny, 0), GridTooSmall);
}

TEST_CASE("an iteration cap too small reports non-convergence with the trace") {
  FitOptions opt;
  opt.max_iterations = 1;
  const auto img = render_image(ThermalCloud{}, 10e-3, RenderOptions{}, 4);
  try {
    extract_sigma(img, opt);
    FAIL("expected non-convergence");
  } catch (const NonConvergence& e) {
    CHECK_FALSE(e.trace.empty());
  }
}

TEST_CASE("noiseless temperature fit is exact") {
  const auto fit = fit_temperature(exact_samples(6e-6, 200e-6));
  CHECK(std::fabs(fit.temperature / 6e-6 - 1) <= 1e-10);
  CHECK(std::fabs(fit.sigma0 / 200e-6 - 1) <= 1e-10);
  CHECK(fit.dof == 6);
}

TEST_CASE("temperature fit errors") {
  CHECK_THROWS_AS(fit_temperature({{1e-3, 1e-4}, {1e-3, 2e-4}, {1e-3, 3e-4}}), PreconditionError);
  CHECK_THROWS_AS(fit_temperature({{0.0, 1e-4}, {1e-3, 1e-4}}), PreconditionError);
  try {
    fit_temperature({{0.0, 3e-4}, {5e-3, 2e-4}, {10e-3, 1e-4}});
    FAIL("expected non-physical fit");
  } catch (const NonPhysicalFit& e) {
    CHECK(e.slope < 0.0);
  }
}

TEST_CASE("property: fit is invariant under reordering and scales with units") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> jitter(0.0, 2e-6);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = exact_samples(5e-6 + trial * 1e-7, 150e-6);
    for (auto& x : s) x.sigma += jitter(rng);
    const auto ref = fit_temperature(s);
    std::shuffle(s.begin(), s.end(), rng);
    const auto shuffled = fit_temperature(s);
    REQUIRE(shuffled.temperature == doctest::Approx(ref.temperature).epsilon(1e-11));
    REQUIRE(shuffled.sigma0 == doctest::Approx(ref.sigma0).epsilon(1e-11));
    const double k = 1e6;  // metres -> micrometres
    for (auto& x : s) x.sigma *= k;
    const auto scaled = fit_temperature(s);
    REQUIRE(scaled.temperature == doctest::Approx(ref.temperature * k * k).epsilon(1e-10));
    REQUIRE(scaled.sigma0 == doctest::Approx(ref.sigma0 * k).epsilon(1e-10));
  }
}

TEST_CASE("end-to-end pipeline at 10 uK") {
  ThermalCloud cloud;
  cloud.temperature = 10e-6;
  const auto run = synthetic_run(cloud, default_times(), RenderOptions{}, 2024);
  CHECK(run.fit.temperature == doctest::Approx(10e-6).epsilon(0.05));
  CHECK(run.fit.temperature_ci_low < run.fit.temperature);
  CHECK(run.fit.temperature_ci_high > run.fit.temperature);
  CHECK(run.samples.size() == 16);
}

TEST_CASE("anisotropic clouds resolve both axes") {
  ThermalCloud cloud;
  cloud.initial_sigma = {150e-6, 300e-6};
  const auto fit = extract_sigma(render_image(cloud, 0.0, noiseless(), 0));
  CHECK(fit.sigma_x == doctest::Approx(150e-6).epsilon(0.005));
  CHECK(fit.sigma_y == doctest::Approx(300e-6).epsilon(0.005));
}

TEST_CASE("OpenMP render reproduces the serial reference") {
  const auto a = render_image_serial(ThermalCloud{}, 12e-3, RenderOptions{}, 77);
  const auto b = render_image(ThermalCloud{}, 12e-3, RenderOptions{}, 77);
  CHECK(a.counts == b.counts);
}

TEST_CASE("PGM fixtures round-trip") {
  const auto img = render_image(ThermalCloud{}, 8e-3, RenderOptions{}, 5);
  const std::string path = "tof_roundtrip.pgm";
  write_pgm(img, path);
  const auto back = read_pgm(path);
  std::remove(path.c_str());
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixel_pitch == img.pixel_pitch);
  CHECK(back.expansion_time == img.expansion_time);
  CHECK(back.origin.x == img.origin.x);
  CHECK(back.counts == img.counts);
}
