#pragma once

#include <cstdint>
#include <memory>

#include "vbmdd/model/kernel.hpp"

namespace vbmdd {

/// y_it = x_it beta + sign * u_i + v_it, rows ordered firm-major (i, then t).
/// sign = -1 for a production frontier, +1 for a cost frontier.
struct SfmData {
  Vec y;
  Mat x;
  Eigen::Index N = 0;
  Eigen::Index T = 0;
  int sign = -1;

  Eigen::Index k() const { return x.cols(); }
  void validate() const;
};

enum class Inefficiency { Exponential, Gamma };

struct SfmTrueParams {
  Vec beta;
  double sigma = 0.2;
  double lambda = 5.0;
  /// Gamma shape; ignored for exponential inefficiency.
  double theta = 1.0;
};

/// x has an intercept column followed by k - 1 standard normal regressors.
SfmData sfm_synthetic(std::uint64_t seed, Eigen::Index N, Eigen::Index T, Eigen::Index k, Inefficiency family,
                      const SfmTrueParams& truth, int sign = -1);

/// beta ~ N(beta_, V_), h = sigma^{-2} ~ G(A_sigma, B_sigma), lambda ~ G(A_lambda, B_lambda).
struct SfmExpPrior {
  Vec beta;
  Mat V;
  double a_sigma = 1.0, b_sigma = 0.01;
  double a_lambda = 1.0, b_lambda = 0.0;
  /// beta_ = 0, V_ = v I, h ~ G(1, 0.01), lambda ~ G(1, -ln 0.875) (prior median efficiency 0.875).
  static SfmExpPrior standard(Eigen::Index k, double v = 100.0);
  void validate(Eigen::Index k) const;
};

/// As SfmExpPrior but u_i ~ G(theta, lambda), lambda | theta ~ G(theta, B_lambda), 1/theta ~ G(A_theta, B_theta).
struct SfmGammaPrior {
  Vec beta;
  Mat V;
  double a_sigma = 1.0, b_sigma = 0.01;
  double b_lambda = 0.0;
  double a_theta = 3.0, b_theta = 2.0;
  static SfmGammaPrior standard(Eigen::Index k, double v = 100.0);
  void validate(Eigen::Index k) const;
};

/// Sum over firms of ln int_0^inf prod_t N(e_it - sign u; 0, 1/h) lambda exp(-lambda u) du, e = y - x beta.
double sfm_exp_integrated_loglik(const SfmData& data, const Vec& beta, double h, double lambda);
/// The same with u_i ~ G(theta, lambda), via the parabolic cylinder integral.
double sfm_gamma_integrated_loglik(const SfmData& data, const Vec& beta, double h, double lambda, double theta);

/// Density on (0, inf) proportional to u^{shape-1} exp(-upsilon^2 u^2 / 2 - mu u).
class PcfDensity {
 public:
  PcfDensity(double shape, double upsilon, double mu);
  double shape() const { return shape_; }
  double log_norm() const { return log_norm_; }
  double log_pdf(double u) const;
  /// E[u^m] from ratios of parabolic cylinder integrals.
  double moment(int m) const;
  double mean_log() const;
  double entropy() const;

 private:
  double shape_, upsilon_, mu_, z_, log_i_, log_norm_;
};

struct SfmExpVb {
  Vec beta;
  Mat V;
  double a_sigma = 0.0, b_sigma = 0.0, a_lambda = 0.0, b_lambda = 0.0;
  /// q(u_i) is N(u_loc_i, u_scale^2) truncated to (0, inf).
  Vec u_loc;
  double u_scale = 0.0;
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
};
SfmExpVb sfm_exp_vb(const SfmExpPrior& prior, const SfmData& data, double tol = 1e-8, int max_iter = 500);
/// Closed-form ln MDD_VBLB.SF.E; valid when b_sigma and b_lambda are at their optimum given q(beta), q(u).
double sfm_exp_vblb(const SfmExpPrior& prior, const SfmData& data, const SfmExpVb& q);
/// The same bound assembled term by term from expectations under q.
double sfm_exp_elbo_terms(const SfmExpPrior& prior, const SfmData& data, const SfmExpVb& q);

struct SfmGammaVb {
  Vec beta;
  Mat V;
  double a_sigma = 0.0, b_sigma = 0.0, a_lambda = 0.0, b_lambda = 0.0;
  /// q(u_i) = PcfDensity(u_shape, upsilon, mu_i); u_shape is the E[theta] the factor was built from.
  Vec mu;
  double upsilon = 0.0, u_shape = 1.0;
  std::shared_ptr<const LogGridDensity> q_theta;
  double theta_mean = 0.0;
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
};
SfmGammaVb sfm_gamma_vb(const SfmGammaPrior& prior, const SfmData& data, double tol = 1e-6, int max_iter = 500);
/// ln MDD_VBLB.SF.G at q, term by term.
double sfm_gamma_elbo(const SfmGammaPrior& prior, const SfmData& data, const SfmGammaVb& q);

/// Blocks "beta", "h" (= sigma^{-2}), "lambda" and, for the complete-data kernel, "u" (N values).
/// The integrated kernel carries u as a sampler latent instead.
class SfmExpModel final : public ModelKernel {
 public:
  SfmExpModel(SfmData data, SfmExpPrior prior, bool complete_data = false);
  std::string name() const override { return complete_data_ ? "sfm-exp-cdl" : "sfm-exp"; }
  const ParamLayout& layout() const override { return layout_; }
  double log_prior(const Vec& theta) const override;
  double log_likelihood(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  bool has_conditionals() const override { return true; }
  BlockDensityPtr conditional(std::size_t block, const ChainState& state) const override;
  Eigen::Index latent_dim() const override { return complete_data_ ? 0 : data_.N; }
  Vec sample_latent(const Vec& theta, Rng& rng) const override;
  ChainState initial_state() const override;
  VBResult fit_vb(const VbConfig& config) const override;
  const SfmData& data() const { return data_; }
  const SfmExpPrior& prior() const { return prior_; }

 private:
  BlockDensityPtr u_conditional(const Vec& theta) const;
  SfmData data_;
  SfmExpPrior prior_;
  bool complete_data_;
  ParamLayout layout_;
  MvNormal beta_prior_;
  Mat v_prior_inv_, xx_;
};

/// Blocks "beta", "h", "lambda", "theta"; u integrated out in the likelihood and
/// carried as a latent by the Metropolis-within-Gibbs sampler.
class SfmGammaModel final : public ModelKernel {
 public:
  SfmGammaModel(SfmData data, SfmGammaPrior prior);
  std::string name() const override { return "sfm-gamma"; }
  const ParamLayout& layout() const override { return layout_; }
  double log_prior(const Vec& theta) const override;
  double log_likelihood(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  Eigen::Index latent_dim() const override { return data_.N; }
  ChainState initial_state() const override;
  /// Conjugate draws for beta, h, lambda; adaptive random-walk Metropolis on
  /// ln theta and each ln u_i, adapted during burn-in only.
  PosteriorDrawSet sample_posterior(const ChainConfig& config, std::uint64_t seed) const override;
  VBResult fit_vb(const VbConfig& config) const override;
  const SfmData& data() const { return data_; }
  const SfmGammaPrior& prior() const { return prior_; }

 private:
  SfmData data_;
  SfmGammaPrior prior_;
  ParamLayout layout_;
  MvNormal beta_prior_;
  Mat v_prior_inv_, xx_;
};

}  // namespace vbmdd
