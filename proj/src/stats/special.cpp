#include "vbmdd/stats/special.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "vbmdd/error.hpp"
#include "vbmdd/simd/kernels.hpp"
#include "vbmdd/stats/quadrature.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730950488016887242097;
}  // namespace

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("log_sum_exp: empty input");
  return simd::log_sum_exp(values);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_sub_exp(double a, double b) {
  if (b > a) throw DomainError("log_sub_exp: b exceeds a");
  if (b == -kInf) return a;
  if (a == b) return -kInf;
  const double d = b - a;
  // log(1 - e^d): expm1 near zero, log1p far from it
  return a + (d > -kLn2 ? std::log(-std::expm1(d)) : std::log1p(-std::exp(d)));
}

double ln_multivariate_gamma(int dim, double x) {
  if (dim < 1) throw ArgumentError("ln_multivariate_gamma: dim must be >= 1");
  if (!(x > 0.5 * (dim - 1))) {
    std::ostringstream msg;
    msg << "ln_multivariate_gamma: x = " << x << " must exceed (dim-1)/2 = " << 0.5 * (dim - 1);
    throw DomainError(msg.str());
  }
  double r = 0.25 * dim * (dim - 1) * kLnPi;
  for (int j = 1; j <= dim; ++j) r += boost::math::lgamma(x + 0.5 * (1 - j));
  return r;
}

double multivariate_digamma(int dim, double x) {
  if (!(x > 0.5 * (dim - 1))) throw DomainError("multivariate_digamma: argument at or below pole");
  double r = 0.0;
  for (int j = 1; j <= dim; ++j) r += boost::math::digamma(x + 0.5 * (1 - j));
  return r;
}

double normal_log_pdf(double x) { return -0.5 * kLnTwoPi - 0.5 * x * x; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double inverse_mills(double x) {
  if (std::isnan(x)) return x;
  if (x < -8.0) {
    // phi/Phi(-z) = z + 1/(z + 2/(z + 3/(z + ...))), evaluated from the tail.
    const double z = -x;
    double tail = z;
    for (int k = 80; k >= 1; --k) tail = z + k / tail;
    return tail;
  }
  return std::exp(normal_log_pdf(x) - std::log(normal_cdf(x)));
}

double log_normal_cdf(double x) {
  if (x < -8.0) return normal_log_pdf(x) - std::log(inverse_mills(x));
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  return std::log(normal_cdf(x));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal_quantile: probability must lie in (0, 1)");
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double log_pcf_integral(double nu, double x, double rel_tol) {
  if (!(nu > 0.0)) throw DomainError("log_pcf_integral: order must be positive");
  QuadratureOptions opts;
  opts.rel_tol = rel_tol;
  opts.max_levels = 30;
  if (nu < 1.0) {
    // s = t^nu removes the t^(nu-1) singularity: integral = (1/nu) int exp(-t^2/2 - x t) ds.
    const double peak = std::max(-x, 0.0);
    const double width = x < 0.0 ? 1.0 : 1.0 / (1.0 + x);
    opts.scale = std::pow(peak + width, nu);
    if (peak > 0.0)
      for (double t : peak_breakpoints(peak, 1.0))
        if (t > 0.0) opts.breakpoints.push_back(std::pow(t, nu));
    const double inv = 1.0 / nu;
    auto f = [&](double s) {
      const double t = std::pow(s, inv);
      return -0.5 * t * t - x * t;
    };
    return quadrature_1d(f, 0.0, kInf, opts) - std::log(nu);
  }
  const double mode = 0.5 * (-x + std::sqrt(x * x + 4.0 * (nu - 1.0)));
  const double sd = mode > 0.0 ? 1.0 / std::sqrt(1.0 + (nu - 1.0) / (mode * mode)) : 1.0 / (1.0 + std::max(x, 0.0));
  opts.scale = mode + sd;
  if (mode > 0.0) opts.breakpoints = peak_breakpoints(mode, sd);
  auto f = [&](double t) {
    if (t <= 0.0) return nu == 1.0 ? 0.0 : -kInf;
    return (nu - 1.0) * std::log(t) - 0.5 * t * t - x * t;
  };
  return quadrature_1d(f, 0.0, kInf, opts);
}

double log_parabolic_cylinder_d(double nu, double x, double rel_tol) {
  if (!(nu >= 0.0)) throw DomainError("log_parabolic_cylinder_d: order must be nonnegative");
  if (nu == 0.0) return -0.25 * x * x;
  return -0.25 * x * x - boost::math::lgamma(nu) + log_pcf_integral(nu, x, rel_tol);
}

double chi_square_cdf(int dof, double x) {
  if (dof < 1) throw ArgumentError("chi_square_cdf: dof must be >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi_square_quantile(int dof, double prob) {
  if (dof < 1) throw ArgumentError("chi_square_quantile: dof must be >= 1");
  if (!(prob > 0.0 && prob < 1.0)) throw ArgumentError("chi_square_quantile: probability must lie in (0, 1)");
  const double a = 0.5 * dof;
  // Bracket, then Newton steps that fall back to bisection when they leave the bracket.
  double lo = 0.0, hi = std::max(1.0, a);
  while (boost::math::gamma_p(a, hi) < prob) {
    lo = hi;
    hi *= 2.0;
  }
  double g = boost::math::gamma_p_inv(a, prob);
  if (!(g > lo && g < hi)) g = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = boost::math::gamma_p(a, g) - prob;
    if (f == 0.0) break;
    if (f < 0.0)
      lo = g;
    else
      hi = g;
    const double d = boost::math::gamma_p_derivative(a, g);
    double next = d > 0.0 ? g - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - g) <= 1e-15 * g) {
      g = next;
      break;
    }
    g = next;
  }
  return 2.0 * g;
}

}  // namespace vbmdd
