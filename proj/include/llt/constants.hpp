#pragma once

#include <numbers>

// Physical constants (SI, CODATA 2018) and 87Rb line data (Steck, "Rubidium 87
// D Line Data", rev. 2.2).
namespace llt::phys {

inline constexpr double pi = std::numbers::pi;

inline constexpr double kB = 1.380649e-23;          // J/K
inline constexpr double mu0 = 1.25663706212e-6;     // T m/A
inline constexpr double c = 299792458.0;            // m/s
inline constexpr double h = 6.62607015e-34;         // J s
inline constexpr double m_Rb87 = 1.443160648e-25;   // kg
inline constexpr double Gamma_D2 = 2.0 * pi * 6.0666e6;  // rad/s
inline constexpr double lambda_D1 = 794.978851156e-9;    // m
inline constexpr double lambda_D2 = 780.241209686e-9;    // m
inline constexpr double torr_per_pascal = 1.0 / 133.322368421;

inline constexpr double inch = 0.0254;  // m
inline constexpr double gauss = 1e-4;   // T

// Atomic line data consumed by the optical models. Tests may swap in modified
// values; everything else uses `rb87()`.
struct LineData {
  double mass = m_Rb87;
  double gamma = Gamma_D2;
  double lambda_d1 = lambda_D1;
  double lambda_d2 = lambda_D2;
};

constexpr LineData rb87() { return {}; }

static_assert(m_Rb87 >= 1.443e-25 && m_Rb87 <= 1.4435e-25);

}  // namespace llt::phys
