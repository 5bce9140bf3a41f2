#pragma once

#include <vector>

#include "vbmdd/model/kernel.hpp"

namespace vbmdd {

/// y_i ~ N(theta, sigma^2) with sigma known and theta ~ N(prior_mean, prior_var).
/// Conjugate, so the posterior and ln p(y) are exact.
class GaussianMeanToy final : public ModelKernel {
 public:
  struct Spec {
    std::vector<double> y;
    double sigma = 1.0;
    double prior_mean = 0.0;
    double prior_var = 1.0;
    /// q = N(posterior mean, vb_var_scale * posterior variance); 1 gives the exact posterior.
    double vb_var_scale = 1.0;
  };

  explicit GaussianMeanToy(Spec spec, std::string block_name = "theta");
  static std::vector<double> simulate(int n, double mean, double sigma, std::uint64_t seed);

  std::string name() const override { return "gaussian-mean"; }
  const ParamLayout& layout() const override { return layout_; }
  double log_prior(const Vec& theta) const override;
  double log_likelihood(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  bool has_conditionals() const override { return true; }
  BlockDensityPtr conditional(std::size_t block, const ChainState& state) const override;
  ChainState initial_state() const override;
  VBResult fit_vb(const VbConfig& config) const override;
  std::optional<double> exact_log_mdd() const override;

  double posterior_mean() const { return post_mean_; }
  double posterior_var() const { return post_var_; }
  /// ELBO of q = N(m, s2), in closed form.
  double elbo(double m, double s2) const;

 private:
  Spec spec_;
  ParamLayout layout_;
  double sum_ = 0.0, sum_sq_ = 0.0;
  double post_mean_ = 0.0, post_var_ = 0.0;
};

/// Two unrelated Gaussian-mean problems sharing one parameter vector (a, b).
/// The posterior factorizes, so a product of marginals is exact.
class TwoBlockToy final : public ModelKernel {
 public:
  TwoBlockToy(GaussianMeanToy::Spec a, GaussianMeanToy::Spec b);

  std::string name() const override { return "two-block"; }
  const ParamLayout& layout() const override { return layout_; }
  double log_prior(const Vec& theta) const override;
  double log_likelihood(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  bool has_conditionals() const override { return true; }
  BlockDensityPtr conditional(std::size_t block, const ChainState& state) const override;
  ChainState initial_state() const override;
  VBResult fit_vb(const VbConfig& config) const override;
  std::optional<double> exact_log_mdd() const override;

 private:
  GaussianMeanToy a_, b_;
  ParamLayout layout_;
};

}  // namespace vbmdd
