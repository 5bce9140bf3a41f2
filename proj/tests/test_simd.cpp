#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "vbmdd/simd/kernels.hpp"
#include "vbmdd/stats/rng.hpp"

using namespace vbmdd;

namespace {
std::vector<double> random_values(std::size_t n, std::uint64_t seed, double spread) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = spread * rng.normal();
  return v;
}
}  // namespace

TEST_CASE("avx2 exp matches std::exp on the nonpositive range") {
  if (!simd::avx2::compiled()) return;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> in = {0.0, -1e-300, -0.5, -1.0, -10.0, -100.0, -700.0, -745.0, -800.0, -inf, -3.3, -42.25};
  for (std::size_t i = 0; i < in.size(); i += 4) {
    double out[4];
    simd::avx2::exp4(&in[i], out);
    for (int j = 0; j < 4; ++j) {
      const double ref = std::exp(in[i + j]);
      if (ref < 1e-300)
        CHECK(out[j] <= 1e-300);
      else
        CHECK(out[j] == doctest::Approx(ref).epsilon(4e-16));
    }
  }
}

TEST_CASE("scalar and avx2 reductions agree") {
  if (simd::detected_isa() != simd::Isa::Avx2) return;
  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 13u, 1000u, 10001u}) {
    auto v = random_values(n, 17 + n, 30.0);
    v[n / 2] = -std::numeric_limits<double>::infinity();
    if (n == 1) v[0] = 2.0;
    CHECK(simd::avx2::max_value(v) == simd::scalar::max_value(v));
    const double m = simd::scalar::max_value(v);
    const double a = simd::avx2::sum_exp_shifted(v, m), s = simd::scalar::sum_exp_shifted(v, m);
    CHECK(a == doctest::Approx(s).epsilon(1e-13));
    const auto ma = simd::avx2::moments_about(v.size() > 1 ? std::span<const double>(v).subspan(0, n / 2) : v, 0.3);
    const auto ms = simd::scalar::moments_about(v.size() > 1 ? std::span<const double>(v).subspan(0, n / 2) : v, 0.3);
    CHECK(ma.sum == doctest::Approx(ms.sum).epsilon(1e-12));
    CHECK(ma.sum_sq_dev == doctest::Approx(ms.sum_sq_dev).epsilon(1e-12));
  }
}

TEST_CASE("affine combine is bit-identical across isas") {
  if (simd::detected_isa() != simd::Isa::Avx2) return;
  const std::size_t count = 1003, stride = 1008, features = 5;
  auto offset = random_values(count, 1, 2.0);
  auto coef = random_values(stride * features, 2, 1.0);
  auto phi = random_values(features, 3, 1.5);
  std::vector<double> a(count), s(count);
  simd::avx2::affine_combine(offset.data(), coef.data(), stride, phi, count, a.data());
  simd::scalar::affine_combine(offset.data(), coef.data(), stride, phi, count, s.data());
  for (std::size_t j = 0; j < count; ++j) CHECK(a[j] == s[j]);
}

TEST_CASE("dispatch can be pinned") {
  const auto prev = simd::set_active_isa(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  auto v = random_values(257, 9, 5.0);
  const double ls = simd::log_sum_exp(v);
  simd::set_active_isa(simd::Isa::Avx2);
  const double la = simd::log_sum_exp(v);
  CHECK(la == doctest::Approx(ls).epsilon(1e-14));
  simd::set_active_isa(prev);
}
