#pragma once

// Data-parallel reductions used by every estimator. Each kernel has a scalar
// reference implementation and an AVX2/FMA variant; the variant is picked at
// runtime from CPUID and both are held to the same results in the tests.

#include <cstddef>
#include <span>

namespace vbmdd::simd {

enum class Isa { Scalar, Avx2 };

/// Best instruction set supported by this CPU and this build.
Isa detected_isa();
/// Instruction set currently used by the dispatching entry points.
Isa active_isa();
/// Pin dispatch to `isa` (falls back to Scalar if unsupported). Returns the previous value.
Isa set_active_isa(Isa isa);
const char* isa_name(Isa isa);

/// Largest element; -inf for an all -inf input. Input must be nonempty.
double max_value(std::span<const double> x);

/// sum_i exp(x_i - shift). Elements equal to -inf contribute zero.
double sum_exp_shifted(std::span<const double> x, double shift);

/// ln sum_i exp(x_i), overflow-free. Returns -inf when every entry is -inf.
/// Input must be nonempty (checked by the public wrapper in stats/).
double log_sum_exp(std::span<const double> x);

/// Affine exponential-family mixture:
///   z_j = offset[j] + sum_k coef[k * stride + j] * phi[k],   j < count
/// returns ln sum_j exp(z_j). `coef` is feature-major (one contiguous row of
/// `count` values per feature, rows `stride` apart). `scratch` must hold `count` doubles.
double affine_log_sum_exp(const double* offset, const double* coef, std::size_t stride,
                          std::span<const double> phi, std::size_t count, double* scratch);

/// Sum and sum of squared deviations about `center`.
struct Moments {
  double sum = 0.0;
  double sum_sq_dev = 0.0;
};
Moments moments_about(std::span<const double> x, double center);

namespace scalar {
double max_value(std::span<const double> x);
double sum_exp_shifted(std::span<const double> x, double shift);
void affine_combine(const double* offset, const double* coef, std::size_t stride,
                    std::span<const double> phi, std::size_t count, double* out);
Moments moments_about(std::span<const double> x, double center);
}  // namespace scalar

namespace avx2 {
bool compiled();
double max_value(std::span<const double> x);
double sum_exp_shifted(std::span<const double> x, double shift);
void affine_combine(const double* offset, const double* coef, std::size_t stride,
                    std::span<const double> phi, std::size_t count, double* out);
Moments moments_about(std::span<const double> x, double center);
/// exp over 4 lanes, exposed for the accuracy tests. x must be <= 0 or -inf.
void exp4(const double* in, double* out);
}  // namespace avx2

}  // namespace vbmdd::simd
