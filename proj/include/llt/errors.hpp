#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace llt {

// Base for every domain error raised by the library. `kind()` is a stable
// identifier that the CLI and the service surface to callers.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct InvalidGeometry : Error {
  explicit InvalidGeometry(const std::string& w) : Error("invalid_geometry", w) {}
};
struct SingularPoint : Error {
  explicit SingularPoint(const std::string& w) : Error("singular_point", w) {}
};
struct IntegrationFailure : Error {
  explicit IntegrationFailure(const std::string& w) : Error("integration_failure", w) {}
};
struct NoEquilibrium : Error {
  explicit NoEquilibrium(const std::string& w) : Error("no_equilibrium", w) {}
};
struct ResonanceError : Error {
  explicit ResonanceError(const std::string& w) : Error("wavelength_on_resonance", w) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& w) : Error("precondition", w) {}
};
struct GridTooSmall : Error {
  explicit GridTooSmall(const std::string& w) : Error("grid_too_small", w) {}
};
struct DegenerateImage : Error {
  explicit DegenerateImage(const std::string& w) : Error("degenerate_image", w) {}
};
struct NonPhysicalFit : Error {
  NonPhysicalFit(const std::string& w, double raw_slope)
      : Error("non_physical_fit", w), slope(raw_slope) {}
  double slope;
};
struct NonConvergence : Error {
  NonConvergence(const std::string& w, std::vector<std::string> iteration_trace)
      : Error("non_convergence", w), trace(std::move(iteration_trace)) {}
  std::vector<std::string> trace;
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct CommandError : Error {
  CommandError(std::string kind, const std::string& w) : Error(std::move(kind), w) {}
};
struct ScenarioAbort : Error {
  ScenarioAbort(const std::string& phase_, const std::string& reason_)
      : Error("scenario_abort", "aborted in phase " + phase_ + ": " + reason_),
        phase(phase_),
        reason(reason_) {}
  std::string phase;
  std::string reason;
};

}  // namespace llt
