#pragma once

#include <functional>
#include <vector>

namespace vbmdd {

struct QuadratureOptions {
  double rel_tol = 1e-10;
  /// Maximum bisection depth of any panel.
  int max_levels = 20;
  /// Length scale of the map t = lower + scale * u / (1 - u) used on infinite ranges.
  double scale = 1.0;
  /// Extra panel boundaries (in the original variable), e.g. the integrand's mode.
  std::vector<double> breakpoints;
  int initial_panels = 8;
};

struct QuadratureResult {
  double log_value = 0.0;
  /// Embedded Gauss/Kronrod error estimate relative to the value.
  double rel_error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Adaptive Gauss-Kronrod (7/15) integration of exp(log_f) over [lower, upper],
/// accumulated in log space. Either bound may be infinite. Does not throw on
/// non-convergence; inspect `converged`.
QuadratureResult log_integrate(const std::function<double(double)>& log_f, double lower, double upper,
                               const QuadratureOptions& opts = {});

/// Breakpoints around a peak: mode, mode +- {3, 6, 12, 24, 48} sd. Nodes of a
/// wide panel can step straight over a narrow peak, so callers that know where
/// the mass sits pass these.
std::vector<double> peak_breakpoints(double mode, double sd);

/// ln of the integral of exp(log_f) over [lower, upper]; throws NumericError
/// carrying the achieved estimate when the tolerance is not met.
double quadrature_1d(const std::function<double(double)>& log_f, double lower, double upper,
                     double tol = 1e-10);
double quadrature_1d(const std::function<double(double)>& log_f, double lower, double upper,
                     const QuadratureOptions& opts);

/// int f over [lower, upper] for a signed integrand, split at `pivots` into
/// pieces of constant sign (each integrated in log space).
double integrate_signed(const std::function<double(double)>& f, double lower, double upper,
                        std::vector<double> pivots, const QuadratureOptions& opts = {});

}  // namespace vbmdd
