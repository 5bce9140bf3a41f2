#include "vbmdd/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace vbmdd::simd::scalar {

double max_value(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = v > m ? v : m;
  return m;
}

double sum_exp_shifted(std::span<const double> x, double shift) {
  double s = 0.0;
  for (double v : x) s += std::exp(v - shift);
  return s;
}

void affine_combine(const double* offset, const double* coef, std::size_t stride,
                    std::span<const double> phi, std::size_t count, double* out) {
  for (std::size_t j = 0; j < count; ++j) out[j] = offset[j];
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double f = phi[k];
    const double* row = coef + k * stride;
    for (std::size_t j = 0; j < count; ++j) out[j] = std::fma(row[j], f, out[j]);
  }
}

Moments moments_about(std::span<const double> x, double center) {
  Moments m;
  for (double v : x) {
    m.sum += v;
    const double d = v - center;
    m.sum_sq_dev += d * d;
  }
  return m;
}

}  // namespace vbmdd::simd::scalar
