#include "vbmdd/diagnostics.hpp"

#include <cmath>
#include <vector>

#include "vbmdd/error.hpp"
#include "vbmdd/simd/kernels.hpp"

namespace vbmdd {

namespace {
double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}
}  // namespace

double nse(std::span<const double> values) {
  if (values.size() < 2) throw ArgumentError("nse: need at least two repetitions");
  for (double v : values)
    if (!std::isfinite(v)) throw ArgumentError("nse: non-finite repetition value");
  const double m = mean_of(values);
  const simd::Moments mo = simd::moments_about(values, m);
  return std::sqrt(mo.sum_sq_dev / static_cast<double>(values.size() - 1));
}

double batch_means_se(std::span<const double> draws, int num_batches) {
  if (num_batches < 2) throw ArgumentError("batch_means_se: need at least two batches");
  if (draws.empty() || draws.size() % static_cast<std::size_t>(num_batches) != 0)
    throw ArgumentError("batch_means_se: draw count is not divisible by the number of batches");
  const std::size_t len = draws.size() / static_cast<std::size_t>(num_batches);
  std::vector<double> means(static_cast<std::size_t>(num_batches));
  for (std::size_t b = 0; b < means.size(); ++b) means[b] = mean_of(draws.subspan(b * len, len));
  return nse(means) / std::sqrt(static_cast<double>(num_batches));
}

double spectral_density_zero(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 100) throw ArgumentError("spectral_density_zero: need at least 100 draws");
  const double m = mean_of(draws);
  const double gamma0 = simd::moments_about(draws, m).sum_sq_dev / static_cast<double>(n);
  if (!(gamma0 > 0.0)) throw NumericError("spectral_density_zero: zero variance input");
  const std::size_t lags = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n))));
  double s = gamma0;
  for (std::size_t k = 1; k <= lags; ++k) {
    double g = 0.0;
    for (std::size_t t = k; t < n; ++t) g += (draws[t] - m) * (draws[t - k] - m);
    g /= static_cast<double>(n);
    s += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(lags + 1)) * g;
  }
  return std::max(0.0, s / gamma0);
}

double percent_in_bounds(std::span<const double> values, const Bounds& bounds) {
  if (bounds.lower > bounds.upper) throw ArgumentError("percent_in_bounds: lower bound exceeds upper bound");
  if (values.empty()) return 0.0;
  std::size_t hit = 0;
  for (double v : values)
    if (v >= bounds.lower && v <= bounds.upper) ++hit;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(values.size());
}

}  // namespace vbmdd
