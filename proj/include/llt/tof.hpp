#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llt/constants.hpp"

// Time-of-flight thermometry: ballistic expansion, synthetic fluorescence
// images, Gaussian spot fits and the sigma^2 vs t^2 temperature fit.
namespace llt::tof {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct ThermalCloud {
  double atom_number = 1e6;
  double temperature = 10e-6;  // K
  Vec2 initial_sigma{200e-6, 200e-6};  // m, per imaging axis
  Vec2 center{};                       // m
  double mass = phys::m_Rb87;
};

double expanded_sigma(double sigma0, double temperature, double t, double mass = phys::m_Rb87);
Vec2 expanded_sigma(const ThermalCloud& cloud, double t);

// Row-major counts; pixel (i, j) is centered at origin + (i, j) * pitch.
struct TofImage {
  int width = 0;
  int height = 0;
  double pixel_pitch = 40e-6;  // m
  Vec2 origin{};               // m, center of pixel (0, 0)
  double expansion_time = 0.0;  // s
  double exposure = 0.0;        // s, tag only
  std::vector<double> counts;

  double at(int i, int j) const { return counts[static_cast<std::size_t>(j) * width + i]; }
  double total() const;
};

struct RenderOptions {
  double pixel_pitch = 40e-6;   // m
  int width = 0;                // 0 = auto, +/- grid_sigmas * sigma(t)
  int height = 0;
  double grid_sigmas = 4.0;     // half-extent used for auto sizing
  double peak_counts = 2000.0;  // peak pixel of the t = 0 image
  double reference_atoms = 1e6; // atom number that produces peak_counts
  bool noise = true;            // Poisson shot noise
};

// Pixel-integrated Gaussian. Integrated counts depend only on atom number,
// so the peak falls as 1/(sigma_x sigma_y). Throws GridTooSmall when the grid
// spans less than 6 sigma(t) on either axis.
TofImage render_image(const ThermalCloud& cloud, double t, const RenderOptions& opt, std::uint64_t seed);
TofImage render_image_serial(const ThermalCloud& cloud, double t, const RenderOptions& opt,
                             std::uint64_t seed);

struct SpotFit {
  double sigma_x = 0.0, sigma_y = 0.0;  // m
  Vec2 center{};
  double amplitude = 0.0;     // integrated counts of the fitted Gaussian
  double residual_norm = 0.0;  // sqrt of summed squared residuals, counts
  int iterations = 0;
};

struct FitOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-8;  // relative parameter step
};

// Levenberg-Marquardt fit of the pixel-integrated Gaussian, initialized from
// image moments. Throws DegenerateImage on empty or flat images and
// NonConvergence (with the iteration trace) when the step criterion is not
// met in max_iterations.
SpotFit extract_sigma(const TofImage& img, const FitOptions& opt = {});

struct Sample {
  double t;      // s
  double sigma;  // m
};

struct TemperatureFit {
  double temperature = 0.0;  // K
  double sigma0 = 0.0;       // m
  double temperature_stderr = 0.0;
  double sigma0_squared_stderr = 0.0;
  double temperature_ci_low = 0.0, temperature_ci_high = 0.0;
  double sigma0_ci_low = 0.0, sigma0_ci_high = 0.0;
  double confidence = 0.95;
  double slope = 0.0;      // m^2/s^2
  double intercept = 0.0;  // m^2
  int dof = 0;
};

// Ordinary least squares of sigma^2 on t^2. Throws PreconditionError with
// fewer than 3 samples or a single distinct time, NonPhysicalFit on a
// negative slope.
TemperatureFit fit_temperature(const std::vector<Sample>& samples, double mass = phys::m_Rb87,
                               double confidence = 0.95);

struct SyntheticRun {
  std::vector<double> times;
  std::vector<SpotFit> spots;
  std::vector<Sample> samples;  // both axes pooled
  TemperatureFit fit;
};

std::vector<double> default_times();  // 8 points, 0..20 ms

// render -> extract -> fit at each time; image seeds derive from `seed`.
SyntheticRun synthetic_run(const ThermalCloud& cloud, const std::vector<double>& times,
                           const RenderOptions& opt, std::uint64_t seed);

// 16-bit binary PGM. Pitch and expansion time travel in a header comment.
void write_pgm(const TofImage& img, const std::string& path);
TofImage read_pgm(const std::string& path);

}  // namespace llt::tof
