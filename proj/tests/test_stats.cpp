#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "vbmdd/error.hpp"
#include "vbmdd/stats/distributions.hpp"
#include "vbmdd/stats/linalg.hpp"
#include "vbmdd/stats/quadrature.hpp"
#include "vbmdd/stats/special.hpp"

using namespace vbmdd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Plain trapezoid on [0, upper] of t^{nu-1} exp(-t^2/2 - x t), returned as a log.
double trapezoid_pcf(double nu, double x, double upper, int n) {
  const double h = upper / n;
  double s = 0.0;
  for (int i = 1; i < n; ++i) {
    const double t = i * h;
    s += std::exp((nu - 1.0) * std::log(t) - 0.5 * t * t - x * t);
  }
  return std::log(s * h);
}
}  // namespace

TEST_CASE("log_sum_exp") {
  CHECK(log_sum_exp(std::vector<double>{0.0}) == 0.0);
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{0.0, std::log(3.0)}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), ArgumentError);
  std::vector<double> v = {-3.0, 0.5, 2.0, -700.0, 11.0};
  const double base = log_sum_exp(v);
  for (double c : {-1000.0, -3.5, 0.0, 7.25, 900.0}) {
    std::vector<double> w = v;
    for (auto& x : w) x += c;
    CHECK(std::abs(log_sum_exp(w) - (base + c)) <= 1e-12 * std::max(1.0, std::abs(base + c)));
  }
  CHECK(log_sum_exp(std::vector<double>{-kInf, -kInf}) == -kInf);
  CHECK(log_add_exp(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)));
  CHECK(log_sub_exp(std::log(5.0), std::log(3.0)) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("multivariate gamma") {
  CHECK(ln_multivariate_gamma(1, 0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-14));
  CHECK(ln_multivariate_gamma(2, 2.0) == doctest::Approx(0.451582705289454865).epsilon(1e-13));
  CHECK(ln_multivariate_gamma(1, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(ln_multivariate_gamma(3, 1.0), DomainError);
  for (double x = 0.1; x < 30.0; x += 0.37) CHECK(ln_multivariate_gamma(1, x) == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
}

TEST_CASE("inverse mills ratio") {
  CHECK(inverse_mills(0.0) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-14));
  CHECK(inverse_mills(10.0) == doctest::Approx(7.69459862670641934e-23).epsilon(1e-10));
  CHECK(inverse_mills(-10.0) == doctest::Approx(10.0980932339625119628).epsilon(1e-13));
  // continuity across the continued-fraction switch
  CHECK(inverse_mills(-8.0 - 1e-12) == doctest::Approx(inverse_mills(-8.0)).epsilon(1e-11));
  CHECK(std::isfinite(inverse_mills(-1e6)));
  CHECK(log_normal_cdf(-40.0) == doctest::Approx(-804.608442013753788).epsilon(1e-14));
  CHECK(log_normal_cdf(-8.5) == doctest::Approx(-39.1973964282176693).epsilon(1e-14));
  CHECK(log_normal_cdf(-3.0) == doctest::Approx(-6.60772622151034954).epsilon(1e-14));
  CHECK(normal_quantile(normal_cdf(1.7)) == doctest::Approx(1.7).epsilon(1e-13));
}

TEST_CASE("parabolic cylinder function") {
  for (double x : {-3.0, 0.0, 2.5}) CHECK(log_parabolic_cylinder_d(0.0, x) == -0.25 * x * x);
  CHECK(log_parabolic_cylinder_d(1.0, 0.0) == doctest::Approx(0.5 * std::log(M_PI / 2.0)).epsilon(1e-12));
  const double oracle = trapezoid_pcf(2.5, 1.3, 40.0, 2000000) - 0.25 * 1.3 * 1.3 - std::lgamma(2.5);
  CHECK(log_parabolic_cylinder_d(2.5, 1.3) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(log_parabolic_cylinder_d(2.5, 1.3) == doctest::Approx(-2.17599190836104579).epsilon(1e-10));
  // reference values from an arbitrary-precision library
  CHECK(log_parabolic_cylinder_d(0.3, -4.0) == doctest::Approx(2.89817198964797548).epsilon(1e-10));
  CHECK(log_parabolic_cylinder_d(0.5, 2.0) == doctest::Approx(-1.41461608572755799).epsilon(1e-10));
  CHECK(log_parabolic_cylinder_d(3.7, -6.0) == doctest::Approx(13.3903284973334814).epsilon(1e-10));
  CHECK(log_parabolic_cylinder_d(1.5, 8.0) == doctest::Approx(-19.1471956981898197).epsilon(1e-10));
  CHECK(log_parabolic_cylinder_d(5.0, 0.0) == doctest::Approx(-1.85365018903510850).epsilon(1e-10));
  CHECK(log_parabolic_cylinder_d(0.3, -30.0) == doctest::Approx(222.442965106427441).epsilon(1e-11));
  CHECK(log_parabolic_cylinder_d(0.7, -12.0) == doctest::Approx(35.9139708518988486).epsilon(1e-11));
  CHECK(log_parabolic_cylinder_d(2.2, -40.0) == doctest::Approx(405.248721425430876).epsilon(1e-11));
  CHECK(log_parabolic_cylinder_d(12.0, 30.0) == doctest::Approx(-265.899767662465689).epsilon(1e-11));
  CHECK(log_parabolic_cylinder_d(0.05, 1.0) == doctest::Approx(-0.263808714281701393).epsilon(1e-10));
  // D_{-1}(x) = exp(x^2/4) sqrt(2 pi) Phi(-x)
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    const double closed = 0.25 * x * x + 0.5 * kLnTwoPi + log_normal_cdf(-x);
    CHECK(std::abs(log_parabolic_cylinder_d(1.0, x) - closed) < 1e-8);
  }
}

TEST_CASE("chi-square quantile") {
  CHECK(chi_square_quantile(1, 0.95) == doctest::Approx(3.84145882069412447).epsilon(1e-12));
  CHECK(chi_square_quantile(2, 0.95) == doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-12));
  CHECK(chi_square_quantile(7, 0.5) == doctest::Approx(6.34581119552151754).epsilon(1e-12));
  CHECK_THROWS_AS(chi_square_quantile(3, 0.0), ArgumentError);
  CHECK_THROWS_AS(chi_square_quantile(3, 1.0), ArgumentError);
  for (int dof : {1, 2, 5, 17, 60})
    for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999}) CHECK(std::abs(chi_square_cdf(dof, chi_square_quantile(dof, p)) - p) < 1e-9);
}

TEST_CASE("adaptive quadrature") {
  CHECK(std::abs(quadrature_1d([](double t) { return -t; }, 0.0, kInf)) < 1e-10);
  CHECK(std::abs(quadrature_1d([](double t) { return t > 0 ? std::log(t) - 0.5 * t * t : -kInf; }, 0.0, kInf)) < 1e-10);
  CHECK(quadrature_1d([](double t) { return 2.7 * std::log(t) - t; }, 0.0, kInf) ==
        doctest::Approx(std::lgamma(3.7)).epsilon(1e-10));
  CHECK(quadrature_1d([](double t) { return normal_log_pdf(t); }, -kInf, kInf) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(quadrature_1d([](double t) { return normal_log_pdf(t); }, -kInf, 0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-10));
  CHECK(quadrature_1d([](double t) { return 0.0; }, 1.0, 3.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // a narrow peak far from the origin must be bracketed by breakpoints
  QuadratureOptions o;
  o.breakpoints = peak_breakpoints(500.0, 0.01);
  o.scale = 500.0;
  CHECK(quadrature_1d([](double t) { return normal_log_pdf((t - 500.0) / 0.01) - std::log(0.01); }, 0.0, kInf, o) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(integrate_signed([](double t) { return std::sin(t); }, 0.0, 2.0 * M_PI, {M_PI}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(integrate_signed([](double t) { return t; }, -1.0, 2.0, {0.0}) == doctest::Approx(1.5).epsilon(1e-12));
  QuadratureOptions tight;
  tight.rel_tol = 1e-300;
  tight.max_levels = 3;
  CHECK_THROWS_AS(quadrature_1d([](double t) { return -t; }, 0.0, kInf, tight), NumericError);
}

TEST_CASE("spd helpers") {
  Mat a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  SpdFactor f(a, "a");
  CHECK(f.log_det() == doctest::Approx(std::log(11.0)));
  CHECK((f.inverse() * a - Mat::Identity(2, 2)).norm() < 1e-14);
  CHECK(unvech(vech(a), 2) == a);
  Mat bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(SpdFactor(bad, "bad"), NumericError);
  Mat asym(2, 2);
  asym << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(MvNormal(Vec::Zero(2), asym), ArgumentError);
}

TEST_CASE("samplers match moments") {
  const int n = 200000;
  SUBCASE("wishart") {
    Wishart w(Mat::Identity(2, 2), 5.0);
    Rng rng(11);
    Mat sum = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) sum += w.sample(rng);
    sum /= n;
    CHECK(sum(0, 0) == doctest::Approx(5.0).epsilon(0.01));
    CHECK(sum(1, 1) == doctest::Approx(5.0).epsilon(0.01));
    CHECK(std::abs(sum(0, 1)) < 0.05);
    CHECK((w.mean() - 5.0 * Mat::Identity(2, 2)).norm() < 1e-12);
  }
  SUBCASE("truncated normal") {
    TruncNormal t(0.0, 1.0);
    Rng rng(12);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += t.sample(rng);
    CHECK(s / n == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.005));
    TruncNormal deep(-20.0, 2.0);
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += deep.sample(rng);
    CHECK(d / n == doctest::Approx(deep.mean()).epsilon(0.01));
  }
  SUBCASE("multivariate normal") {
    Mat cov = Mat::Zero(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = 4.0;
    MvNormal mv(Vec::Zero(2), cov);
    Rng rng(13);
    Mat acc = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      Vec x = mv.sample(rng);
      acc += x * x.transpose();
    }
    acc /= n;
    CHECK(acc(0, 0) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(acc(1, 1) == doctest::Approx(4.0).epsilon(0.01));
    CHECK(std::abs(acc(0, 1)) < 0.02);
  }
  SUBCASE("gamma") {
    for (double shape : {0.3, 1.0, 4.5}) {
      GammaDist g(shape, 2.0);
      Rng rng(14);
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double x = g.sample(rng);
        s += x;
        s2 += x * x;
      }
      const double m = s / n;
      CHECK(m == doctest::Approx(shape / 2.0).epsilon(0.01));
      CHECK(s2 / n - m * m == doctest::Approx(shape / 4.0).epsilon(0.03));
    }
  }
  SUBCASE("matric normal") {
    Mat u(2, 2), v(3, 3);
    u << 2.0, 0.5, 0.5, 1.0;
    v << 1.0, 0.2, 0.0, 0.2, 1.5, 0.3, 0.0, 0.3, 0.8;
    MatricNormal mn(MatricNormalParams{Mat::Zero(2, 3), u, v});
    Rng rng(15);
    double c = 0.0;
    for (int i = 0; i < n; ++i) {
      Mat x = mn.sample(rng);
      c += x(0, 1) * x(1, 2);  // cov = U(0,1) V(1,2)
    }
    CHECK(c / n == doctest::Approx(0.5 * 0.3).epsilon(0.05));
  }
}

TEST_CASE("samplers are reproducible") {
  Wishart w(Mat::Identity(3, 3) * 2.0, 7.0);
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(w.sample(a) == w.sample(b));
  TruncNormal t(-7.0, 1.0);
  for (int i = 0; i < 10; ++i) CHECK(t.sample(a) == t.sample(b));
}

TEST_CASE("densities normalize and match entropies") {
  SUBCASE("truncated normal moments against quadrature") {
    for (double r = -6.0; r <= 6.0; r += 0.5) {
      TruncNormal t(r * 1.7, 1.7);
      auto lp = [&](double x) { return t.log_pdf(x); };
      QuadratureOptions o;
      o.rel_tol = 1e-12;
      o.scale = t.mean() + 2.0 * std::sqrt(t.variance());
      CHECK(std::abs(quadrature_1d(lp, 0.0, kInf, o)) < 1e-10);
      const double m = std::exp(quadrature_1d([&](double x) { return std::log(x) + lp(x); }, 0.0, kInf, o));
      CHECK(std::abs(m - t.mean()) < 1e-9 * std::max(1.0, t.mean()));
      const double m2 = std::exp(quadrature_1d([&](double x) { return 2.0 * std::log(x) + lp(x); }, 0.0, kInf, o));
      CHECK(std::abs(m2 - m * m - t.variance()) < 1e-9 * std::max(1.0, m2));
      const double h = -integrate_signed([&](double x) { return std::exp(lp(x)) * lp(x); }, 0.0, kInf, {}, o);
      CHECK(h == doctest::Approx(t.entropy()).epsilon(1e-8));
    }
    // deep tail variance through the continued fraction
    TruncNormal deep(-30.0, 1.0);
    const double z = 30.0;
    CHECK(deep.variance() == doctest::Approx(1.0 / (z * z) - 5.0 / std::pow(z, 4)).epsilon(1e-4));
  }
  SUBCASE("gamma entropy") {
    GammaDist g(2.3, 0.7);
    const double h = -integrate_signed([&](double x) { return std::exp(g.log_pdf(x)) * g.log_pdf(x); }, 0.0, kInf, {});
    CHECK(h == doctest::Approx(g.entropy()).epsilon(1e-8));
  }
  SUBCASE("wishart 1x1 is a gamma") {
    Mat s(1, 1);
    s << 2.5;
    Wishart w(s, 4.0);
    GammaDist g(2.0, 1.25);
    Mat p(1, 1);
    p << 0.8;
    CHECK(w.log_pdf(p) == doctest::Approx(g.log_pdf(0.8)).epsilon(1e-13));
    CHECK(w.entropy() == doctest::Approx(g.entropy()).epsilon(1e-13));
    CHECK(w.expected_log_det() == doctest::Approx(g.expected_log()).epsilon(1e-13));
  }
}
