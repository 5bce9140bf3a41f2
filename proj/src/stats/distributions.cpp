#include "vbmdd/stats/distributions.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Mat standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat z(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = rng.normal();
  return z;
}
}  // namespace

MvNormal::MvNormal(MvNormalParams p) : p_(std::move(p)) {
  if (p_.covariance.rows() != p_.mean.size())
    throw ArgumentError("MvNormal: covariance order does not match mean length");
  require_symmetric(p_.covariance, "MvNormal covariance");
  chol_ = SpdFactor(p_.covariance, "MvNormal covariance");
}

double MvNormal::log_pdf(const Vec& x) const {
  const double n = static_cast<double>(dim());
  return -0.5 * (n * kLnTwoPi + chol_.log_det() + chol_.quad_form_inv(x - p_.mean));
}

Vec MvNormal::sample(Rng& rng) const {
  Vec z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return p_.mean + chol_.lower() * z;
}

double MvNormal::entropy() const {
  const double n = static_cast<double>(dim());
  return 0.5 * (n * (1.0 + kLnTwoPi) + chol_.log_det());
}

MatricNormal::MatricNormal(MatricNormalParams p) : p_(std::move(p)) {
  if (p_.row_cov.rows() != p_.mean.rows() || p_.col_cov.rows() != p_.mean.cols())
    throw ArgumentError("MatricNormal: covariance orders do not match mean shape");
  require_symmetric(p_.row_cov, "MatricNormal row covariance");
  require_symmetric(p_.col_cov, "MatricNormal column covariance");
  row_ = SpdFactor(p_.row_cov, "MatricNormal row covariance");
  col_ = SpdFactor(p_.col_cov, "MatricNormal column covariance");
}

double MatricNormal::log_pdf(const Mat& x) const {
  const double k = static_cast<double>(p_.mean.rows()), n = static_cast<double>(p_.mean.cols());
  // tr(V^{-1} D' U^{-1} D) = ||L_U^{-1} D L_V^{-T}||_F^2
  Mat w = row_.lower().triangularView<Eigen::Lower>().solve(x - p_.mean);
  Mat wt = col_.lower().triangularView<Eigen::Lower>().solve(w.transpose());
  return -0.5 * (k * n * kLnTwoPi + n * row_.log_det() + k * col_.log_det() + wt.squaredNorm());
}

Mat MatricNormal::sample(Rng& rng) const {
  const Mat z = standard_normal_matrix(p_.mean.rows(), p_.mean.cols(), rng);
  return p_.mean + row_.lower() * z * col_.lower().transpose();
}

Wishart::Wishart(WishartParams p) : p_(std::move(p)) {
  const Eigen::Index n = p_.scale_inverse.rows();
  require_symmetric(p_.scale_inverse, "Wishart scale");
  if (!(p_.dof > static_cast<double>(n) - 1.0))
    throw ModelConfigError("Wishart: dof " + std::to_string(p_.dof) + " must exceed N-1 = " + std::to_string(n - 1));
  s_ = SpdFactor(p_.scale_inverse, "Wishart scale");
  scale_lower_ = SpdFactor(symmetrize(s_.inverse()), "Wishart scale inverse").lower();
  const double nd = static_cast<double>(n);
  log_norm_ = -0.5 * p_.dof * nd * kLn2 + 0.5 * p_.dof * s_.log_det() -
              ln_multivariate_gamma(static_cast<int>(n), 0.5 * p_.dof);
}

Mat Wishart::mean() const { return p_.dof * symmetrize(s_.inverse()); }

double Wishart::expected_log_det() const {
  const Eigen::Index n = dim();
  return multivariate_digamma(static_cast<int>(n), 0.5 * p_.dof) + static_cast<double>(n) * kLn2 - s_.log_det();
}

double Wishart::entropy() const {
  const double n = static_cast<double>(dim());
  return -0.5 * (p_.dof - n - 1.0) * expected_log_det() + 0.5 * p_.dof * n - log_norm_;
}

double Wishart::log_pdf(const Mat& p) const {
  if (p.rows() != dim() || p.cols() != dim()) throw ArgumentError("Wishart: argument has the wrong order");
  Eigen::LLT<Mat> llt(p);
  if (llt.info() != Eigen::Success) return -kInf;
  const Mat& l = llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) return -kInf;
    log_det += 2.0 * std::log(l(i, i));
  }
  const double n = static_cast<double>(dim());
  const double tr = (p_.scale_inverse.array() * p.array()).sum();
  return 0.5 * (p_.dof - n - 1.0) * log_det - 0.5 * tr + log_norm_;
}

Mat Wishart::sample(Rng& rng) const {
  // Bartlett decomposition: P = L A A' L' with L L' = S^{-1}.
  const Eigen::Index n = dim();
  Mat a = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = std::sqrt(2.0 * sample_standard_gamma(0.5 * (p_.dof - static_cast<double>(i)), rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Mat la = scale_lower_ * a;
  return symmetrize(la * la.transpose());
}

double sample_standard_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw ArgumentError("gamma sampler: shape must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_standard_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

GammaDist::GammaDist(GammaParams p) : p_(p) {
  if (!(p_.shape > 0.0) || !(p_.rate > 0.0)) throw ModelConfigError("Gamma: shape and rate must be positive");
}

double GammaDist::expected_log() const { return boost::math::digamma(p_.shape) - std::log(p_.rate); }

double GammaDist::entropy() const {
  const double a = p_.shape;
  return a - std::log(p_.rate) + boost::math::lgamma(a) + (1.0 - a) * boost::math::digamma(a);
}

double GammaDist::log_pdf(double x) const {
  if (!(x > 0.0)) return -kInf;
  return p_.shape * std::log(p_.rate) - boost::math::lgamma(p_.shape) + (p_.shape - 1.0) * std::log(x) -
         p_.rate * x;
}

double GammaDist::sample(Rng& rng) const { return sample_standard_gamma(p_.shape, rng) / p_.rate; }

TruncNormal::TruncNormal(TruncNormalParams p) : p_(p) {
  if (!(p_.scale > 0.0)) throw ModelConfigError("TruncNormal: scale must be positive");
  if (!std::isfinite(p_.location)) throw ModelConfigError("TruncNormal: location must be finite");
}

double TruncNormal::mean() const {
  const double r = p_.location / p_.scale;
  return p_.location + p_.scale * inverse_mills(r);
}

double TruncNormal::variance() const {
  const double r = p_.location / p_.scale;
  const double s2 = p_.scale * p_.scale;
  if (r >= -8.0) {
    const double lam = inverse_mills(r);
    return s2 * (1.0 - lam * (r + lam));
  }
  // Deep tail: with T_k = z + k / T_{k+1} (z = -r), 1 - lam (lam - z) = (2 T_2 - T_3) / (T_2^2 T_3),
  // which avoids the cancellation in the direct form.
  const double z = -r;
  double t3 = z;
  for (int k = 80; k >= 3; --k) t3 = z + k / t3;
  const double t2 = z + 2.0 / t3;
  return s2 * (2.0 * t2 - t3) / (t2 * t2 * t3);
}

double TruncNormal::entropy() const {
  const double r = p_.location / p_.scale;
  return 0.5 * (1.0 + kLnTwoPi) + std::log(p_.scale) + log_normal_cdf(r) - 0.5 * r * inverse_mills(r);
}

double TruncNormal::log_pdf(double x) const {
  if (x < 0.0) return -kInf;
  const double z = (x - p_.location) / p_.scale;
  return normal_log_pdf(z) - std::log(p_.scale) - log_normal_cdf(p_.location / p_.scale);
}

double TruncNormal::sample(Rng& rng) const {
  const double r = p_.location / p_.scale;
  const double a = -r;  // standardized lower bound
  double z;
  if (r >= -5.0) {
    // z >= a by inversion of the upper tail: z = -Phi^{-1}(U Phi(r)).
    const double u = rng.uniform();
    z = -normal_quantile(u * normal_cdf(r));
    if (z < a) z = a;
  } else {
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    while (true) {
      z = a + rng.exponential() / alpha;
      const double d = z - alpha;
      if (rng.uniform() <= std::exp(-0.5 * d * d)) break;
    }
  }
  return std::max(0.0, p_.location + p_.scale * z);
}

}  // namespace vbmdd
