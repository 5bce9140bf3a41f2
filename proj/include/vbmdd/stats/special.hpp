#pragma once

#include <span>

namespace vbmdd {

inline constexpr double kLnTwoPi = 1.8378770664093454835606594728112;
inline constexpr double kLnPi = 1.1447298858494001741434273513531;
inline constexpr double kLn2 = 0.69314718055994530941723212145818;

/// ln sum exp(v_i) without overflow. Throws ArgumentError on empty input.
double log_sum_exp(std::span<const double> values);
/// ln(exp(a) + exp(b)).
double log_add_exp(double a, double b);
/// ln(exp(a) - exp(b)) for a >= b.
double log_sub_exp(double a, double b);

/// ln Gamma_dim(x) = dim(dim-1)/4 ln pi + sum_j ln Gamma(x + (1-j)/2).
/// Throws DomainError when x <= (dim-1)/2.
double ln_multivariate_gamma(int dim, double x);
/// d/dx ln Gamma_dim(x).
double multivariate_digamma(int dim, double x);

double normal_log_pdf(double x);
double normal_cdf(double x);
/// ln Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);
double normal_quantile(double p);

/// phi(x) / Phi(x). Uses the Mills-ratio continued fraction below x = -8.
double inverse_mills(double x);

/// ln D_{-nu}(x) for nu >= 0 from the integral representation
///   D_{-nu}(x) = exp(-x^2/4) / Gamma(nu) * int_0^inf t^{nu-1} exp(-t^2/2 - x t) dt.
/// nu = 0 gives -x^2/4 exactly. Throws NumericError if quadrature does not converge.
double log_parabolic_cylinder_d(double nu, double x, double rel_tol = 1e-12);

/// ln of the integral int_0^inf t^{nu-1} exp(-t^2/2 - x t) dt (nu > 0).
double log_pcf_integral(double nu, double x, double rel_tol = 1e-12);

double chi_square_cdf(int dof, double x);
/// x with P(dof/2, x/2) = prob: bracketed Newton/bisection started from Boost's inverse.
double chi_square_quantile(int dof, double prob);

}  // namespace vbmdd
