#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vbmdd/model/kernel.hpp"
#include "vbmdd/model/weighting.hpp"

namespace vbmdd {

struct MddEstimate {
  double log_mdd = 0.0;
  std::string method;
  Eigen::Index draws_s = 0;
  Eigen::Index draws_o = 0;
  int iterations = 0;
  /// Bridge-sampling iterates.
  std::vector<double> trace;
  /// Per-draw log summands (RIS: ln h - ln kernel), kept for batch-means errors.
  std::vector<double> log_terms;
  /// Method-specific extras, e.g. the CHM box probability.
  std::vector<std::pair<std::string, double>> extras;
};

/// Kernel pieces evaluated once at every chain draw and shared by all estimators.
struct ChainEvaluation {
  const PosteriorDrawSet* draws = nullptr;
  std::vector<double> log_prior;
  std::vector<double> log_likelihood;
  std::vector<double> log_kernel;
};

ChainEvaluation evaluate_chain(const ModelKernel& model, const PosteriorDrawSet& draws);

/// Reciprocal importance sampling: 1/p(y) ~ mean_s h(theta_s) / kernel(theta_s).
MddEstimate ris_estimate(const ChainEvaluation& chain, const WeightingDensity& h);

struct BridgeOptions {
  Eigen::Index draws_o = 0;  // 0: same as the chain length
  double tol = 1e-10;
  int max_iter = 100;
};

/// Meng-Wong optimal bridge recursion, iterated in log space from the RIS value with h = g.
MddEstimate bs_estimate(const ModelKernel& model, const ChainEvaluation& chain, const WeightingDensity& g,
                        const BridgeOptions& opts, Rng& rng);

/// One bridge step from `log_r`; exposed so callers can check the fixed point.
double bridge_step(const std::vector<double>& l_post, const std::vector<double>& l_g, double log_r);

/// Importance sampling: p(y) ~ mean_r kernel(theta_r) / f(theta_r), theta_r ~ f.
MddEstimate is_estimate(const ModelKernel& model, const WeightingDensity& f, Eigen::Index draws_r, Rng& rng);

/// Lenk's corrected harmonic mean.
MddEstimate chm_estimate(const ModelKernel& model, const ChainEvaluation& chain, Eigen::Index draws_r, Rng& rng);

struct ChibOptions {
  /// 0: same as the chain length.
  int reduced_run_length = 0;
  int reduced_burn_in = 200;
};

/// Chib's estimator from Gibbs output at theta* (default: posterior mean,
/// geometric mean on positive blocks).
MddEstimate chib_estimate(const ModelKernel& model, const ChainEvaluation& chain, const ChibOptions& opts,
                          std::uint64_t seed, const Vec* theta_star = nullptr);
Vec chib_default_point(const ModelKernel& model, const PosteriorDrawSet& draws);

// Weighting densities.
WeightingPtr make_vb_weighting(const VBResult& vb);
WeightingPtr make_prior_weighting(const ModelKernel& model);
/// Normal on the unconstrained space truncated to its 100(1-alpha)% region (Geweke).
/// alpha = 0 gives the untruncated normal.
WeightingPtr make_geweke_weighting(const ParamLayout& layout, const PosteriorDrawSet& draws, double alpha = 0.05);
/// Rao-Blackwellized product of marginals averaged over `states` evenly thinned chain states.
WeightingPtr make_pmd_weighting(const ModelKernel& model, const PosteriorDrawSet& draws, int states = 1000);

struct SwzOptions {
  double kernel_quantile = 0.1;  // L: this quantile of the log kernel over the chain
  Eigen::Index mc_draws = 20000;  // draws for the (1 - alpha_L) estimate
};
/// Sims-Waggoner-Zha elliptical weighting. `rng` drives the mass estimate.
WeightingPtr make_swz_weighting(const ModelKernel& model, const ChainEvaluation& chain, const SwzOptions& opts,
                                Rng& rng);

}  // namespace vbmdd
