#pragma once

#include <limits>
#include <span>

namespace vbmdd {

/// Sample standard deviation (n-1 denominator) of repeated log-MDD estimates.
double nse(std::span<const double> values);

/// sd(batch means) / sqrt(num_batches). Length must be divisible by num_batches.
double batch_means_se(std::span<const double> draws, int num_batches);

/// Normalized spectral density at frequency zero, 1 + 2 sum_{k<=L} (1 - k/(L+1)) rho_k
/// with L = floor(S^{1/3}). Clamped at zero.
double spectral_density_zero(std::span<const double> draws);

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Percentage of values in [lower, upper].
double percent_in_bounds(std::span<const double> values, const Bounds& bounds);

}  // namespace vbmdd
