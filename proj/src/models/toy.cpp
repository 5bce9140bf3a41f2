#include "vbmdd/models/toy.hpp"

#include <cmath>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
Vec scalar(double x) { return Vec::Constant(1, x); }
}  // namespace

GaussianMeanToy::GaussianMeanToy(Spec spec, std::string block_name) : spec_(std::move(spec)) {
  if (!(spec_.sigma > 0.0) || !(spec_.prior_var > 0.0) || !(spec_.vb_var_scale > 0.0))
    throw ModelConfigError("gaussian-mean toy: variances must be positive");
  layout_.add_real(std::move(block_name), 1);
  for (double v : spec_.y) {
    sum_ += v;
    sum_sq_ += v * v;
  }
  const double n = static_cast<double>(spec_.y.size());
  const double s2 = spec_.sigma * spec_.sigma;
  post_var_ = 1.0 / (1.0 / spec_.prior_var + n / s2);
  post_mean_ = post_var_ * (spec_.prior_mean / spec_.prior_var + sum_ / s2);
}

std::vector<double> GaussianMeanToy::simulate(int n, double mean, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = mean + sigma * rng.normal();
  return y;
}

double GaussianMeanToy::log_prior(const Vec& theta) const {
  const double z = (theta(0) - spec_.prior_mean) / std::sqrt(spec_.prior_var);
  return normal_log_pdf(z) - 0.5 * std::log(spec_.prior_var);
}

double GaussianMeanToy::log_likelihood(const Vec& theta) const {
  const double n = static_cast<double>(spec_.y.size());
  const double s2 = spec_.sigma * spec_.sigma;
  const double ss = sum_sq_ - 2.0 * theta(0) * sum_ + n * theta(0) * theta(0);
  return -0.5 * n * (kLnTwoPi + std::log(s2)) - 0.5 * ss / s2;
}

Vec GaussianMeanToy::sample_prior(Rng& rng) const {
  return scalar(spec_.prior_mean + std::sqrt(spec_.prior_var) * rng.normal());
}

BlockDensityPtr GaussianMeanToy::conditional(std::size_t block, const ChainState&) const {
  if (block != 0) throw ArgumentError("gaussian-mean toy has one block");
  return std::make_shared<NormalBlock>(scalar(post_mean_), Mat::Constant(1, 1, post_var_));
}

ChainState GaussianMeanToy::initial_state() const { return {scalar(post_mean_), Vec()}; }

double GaussianMeanToy::elbo(double m, double s2) const {
  const double n = static_cast<double>(spec_.y.size());
  const double sig2 = spec_.sigma * spec_.sigma;
  const double ss = sum_sq_ - 2.0 * m * sum_ + n * m * m + n * s2;
  const double e_lik = -0.5 * n * (kLnTwoPi + std::log(sig2)) - 0.5 * ss / sig2;
  const double d = m - spec_.prior_mean;
  const double e_prior = -0.5 * (kLnTwoPi + std::log(spec_.prior_var)) - 0.5 * (d * d + s2) / spec_.prior_var;
  const double entropy = 0.5 * (1.0 + kLnTwoPi + std::log(s2));
  return e_lik + e_prior + entropy;
}

VBResult GaussianMeanToy::fit_vb(const VbConfig&) const {
  VBResult r;
  const double s2 = spec_.vb_var_scale * post_var_;
  auto factor = std::make_shared<NormalBlock>(scalar(post_mean_), Mat::Constant(1, 1, s2));
  r.q = std::make_shared<ProductDensity>("vb", layout_, std::vector<BlockDensityPtr>{factor});
  r.elbo = elbo(post_mean_, s2);
  r.elbo_trace = {r.elbo};
  r.iterations = 1;
  r.converged = true;
  r.status = "closed form";
  r.hyper = {{"mean", Mat::Constant(1, 1, post_mean_)}, {"variance", Mat::Constant(1, 1, s2)}};
  return r;
}

std::optional<double> GaussianMeanToy::exact_log_mdd() const {
  // Basic marginal likelihood identity at the posterior mean.
  const Vec t = scalar(post_mean_);
  return log_likelihood(t) + log_prior(t) + 0.5 * (kLnTwoPi + std::log(post_var_));
}

TwoBlockToy::TwoBlockToy(GaussianMeanToy::Spec a, GaussianMeanToy::Spec b)
    : a_(std::move(a), "a"), b_(std::move(b), "b") {
  layout_.add_real("a", 1).add_real("b", 1);
}

double TwoBlockToy::log_prior(const Vec& theta) const {
  return a_.log_prior(scalar(theta(0))) + b_.log_prior(scalar(theta(1)));
}

double TwoBlockToy::log_likelihood(const Vec& theta) const {
  return a_.log_likelihood(scalar(theta(0))) + b_.log_likelihood(scalar(theta(1)));
}

Vec TwoBlockToy::sample_prior(Rng& rng) const {
  Vec t(2);
  t(0) = a_.sample_prior(rng)(0);
  t(1) = b_.sample_prior(rng)(0);
  return t;
}

BlockDensityPtr TwoBlockToy::conditional(std::size_t block, const ChainState& state) const {
  return block == 0 ? a_.conditional(0, state) : b_.conditional(0, state);
}

ChainState TwoBlockToy::initial_state() const {
  Vec t(2);
  t << a_.posterior_mean(), b_.posterior_mean();
  return {t, Vec()};
}

VBResult TwoBlockToy::fit_vb(const VbConfig& config) const {
  VBResult ra = a_.fit_vb(config), rb = b_.fit_vb(config);
  VBResult r;
  r.q = std::make_shared<ProductDensity>("vb", layout_,
                                         std::vector<BlockDensityPtr>{ra.q->factor_ptr(0), rb.q->factor_ptr(0)});
  r.elbo = ra.elbo + rb.elbo;
  r.elbo_trace = {r.elbo};
  r.iterations = 1;
  r.converged = true;
  r.status = "closed form";
  return r;
}

std::optional<double> TwoBlockToy::exact_log_mdd() const { return *a_.exact_log_mdd() + *b_.exact_log_mdd(); }

}  // namespace vbmdd
