#include "vbmdd/simd/kernels.hpp"

#include <cmath>
#include <limits>

#if defined(VBMDD_BUILD_AVX2)
#include <immintrin.h>
#endif

namespace vbmdd::simd::avx2 {

#if defined(VBMDD_BUILD_AVX2)

namespace {

// Cephes-style exp: n = round(x log2 e), r = x - n ln 2 (two-part constant),
// exp(r) from a (2,3) Pade form, then scale by 2^n through the exponent bits.
// Valid for x <= 0; anything below -708 (including -inf) flushes to zero.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d lower = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lower);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, c1, x);
  r = _mm256_fnmadd_pd(n, c2, r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
  px = _mm256_fmadd_pd(px, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  px = _mm256_fmadd_pd(px, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  px = _mm256_mul_pd(px, r);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.00000000000000000009e0));
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));
  return _mm256_blendv_pd(e, _mm256_setzero_pd(), underflow);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

}  // namespace

bool compiled() { return true; }

void exp4(const double* in, double* out) {
  _mm256_storeu_pd(out, exp_nonpositive(_mm256_loadu_pd(in)));
}

double max_value(std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t i = 0;
  double m = -std::numeric_limits<double>::infinity();
  if (n >= 4) {
    __m256d acc = _mm256_set1_pd(m);
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x.data() + i));
    m = hmax(acc);
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double sum_exp_shifted(std::span<const double> x, double shift) {
  const std::size_t n = x.size();
  const __m256d s = _mm256_set1_pd(shift);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, exp_nonpositive(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), s)));
    acc1 = _mm256_add_pd(acc1, exp_nonpositive(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i + 4), s)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, exp_nonpositive(_mm256_sub_pd(_mm256_loadu_pd(x.data() + i), s)));
  double total = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) total += std::exp(x[i] - shift);
  return total;
}

void affine_combine(const double* offset, const double* coef, std::size_t stride,
                    std::span<const double> phi, std::size_t count, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) _mm256_storeu_pd(out + j, _mm256_loadu_pd(offset + j));
  for (; j < count; ++j) out[j] = offset[j];
  for (std::size_t k = 0; k < phi.size(); ++k) {
    const double f = phi[k];
    const __m256d fv = _mm256_set1_pd(f);
    const double* row = coef + k * stride;
    j = 0;
    for (; j + 4 <= count; j += 4) {
      __m256d acc = _mm256_loadu_pd(out + j);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), fv, acc);
      _mm256_storeu_pd(out + j, acc);
    }
    for (; j < count; ++j) out[j] = std::fma(row[j], f, out[j]);
  }
}

Moments moments_about(std::span<const double> x, double center) {
  const std::size_t n = x.size();
  const __m256d c = _mm256_set1_pd(center);
  __m256d s = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x.data() + i);
    s = _mm256_add_pd(s, v);
    const __m256d d = _mm256_sub_pd(v, c);
    q = _mm256_fmadd_pd(d, d, q);
  }
  Moments m{hsum(s), hsum(q)};
  for (; i < n; ++i) {
    m.sum += x[i];
    const double d = x[i] - center;
    m.sum_sq_dev += d * d;
  }
  return m;
}

#else

bool compiled() { return false; }
void exp4(const double* in, double* out) {
  for (int i = 0; i < 4; ++i) out[i] = std::exp(in[i]);
}
double max_value(std::span<const double> x) { return scalar::max_value(x); }
double sum_exp_shifted(std::span<const double> x, double shift) { return scalar::sum_exp_shifted(x, shift); }
void affine_combine(const double* offset, const double* coef, std::size_t stride,
                    std::span<const double> phi, std::size_t count, double* out) {
  scalar::affine_combine(offset, coef, stride, phi, count, out);
}
Moments moments_about(std::span<const double> x, double center) { return scalar::moments_about(x, center); }

#endif

}  // namespace vbmdd::simd::avx2
