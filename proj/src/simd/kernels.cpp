#include "vbmdd/simd/kernels.hpp"

#include <atomic>
#include <cmath>
#include <limits>

namespace vbmdd::simd {

namespace {

Isa probe() {
#if defined(VBMDD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  if (avx2::compiled() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{probe()};
  return isa;
}

bool use_avx2() { return active().load(std::memory_order_relaxed) == Isa::Avx2; }

}  // namespace

Isa detected_isa() {
  static const Isa isa = probe();
  return isa;
}

Isa active_isa() { return active().load(); }

Isa set_active_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) isa = Isa::Scalar;
  return active().exchange(isa);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double max_value(std::span<const double> x) {
  return use_avx2() ? avx2::max_value(x) : scalar::max_value(x);
}

double sum_exp_shifted(std::span<const double> x, double shift) {
  return use_avx2() ? avx2::sum_exp_shifted(x, shift) : scalar::sum_exp_shifted(x, shift);
}

double log_sum_exp(std::span<const double> x) {
  const double m = max_value(x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  if (m == std::numeric_limits<double>::infinity()) return m;
  return m + std::log(sum_exp_shifted(x, m));
}

double affine_log_sum_exp(const double* offset, const double* coef, std::size_t stride,
                          std::span<const double> phi, std::size_t count, double* scratch) {
  if (use_avx2())
    avx2::affine_combine(offset, coef, stride, phi, count, scratch);
  else
    scalar::affine_combine(offset, coef, stride, phi, count, scratch);
  return log_sum_exp(std::span<const double>(scratch, count));
}

Moments moments_about(std::span<const double> x, double center) {
  return use_avx2() ? avx2::moments_about(x, center) : scalar::moments_about(x, center);
}

}  // namespace vbmdd::simd
