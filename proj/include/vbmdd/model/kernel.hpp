#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vbmdd/model/block_density.hpp"
#include "vbmdd/model/layout.hpp"
#include "vbmdd/model/weighting.hpp"

namespace vbmdd {

struct ChainConfig {
  int draws = 10000;
  int burn_in = 1000;
  int thin = 1;
};

/// One state of a sampler: parameters plus any latent variables the sampler carries.
struct ChainState {
  Vec theta;
  Vec latent;
};

/// Retained MCMC draws, one column per draw.
struct PosteriorDrawSet {
  Mat theta;
  Mat latent;  // empty when the sampler carries no latents
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return theta.cols(); }
  Vec draw(Eigen::Index s) const { return theta.col(s); }
  ChainState state(Eigen::Index s) const {
    return {theta.col(s), latent.size() ? Vec(latent.col(s)) : Vec()};
  }
};

struct VbConfig {
  /// Non-positive means "model default".
  double tol = 0.0;
  int max_iter = 500;
  double damping = 0.5;
};

struct HyperParam {
  std::string name;
  Mat value;
};

struct VBResult {
  std::shared_ptr<const ProductDensity> q;
  std::vector<double> elbo_trace;
  /// ln MDD_VBLB at the returned hyper-parameters.
  double elbo = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string status;
  std::vector<HyperParam> hyper;
};

/// One model family with its data bound in. Evaluators are const and safe to
/// share across threads; samplers take their own generator seed.
class ModelKernel {
 public:
  virtual ~ModelKernel() = default;

  virtual std::string name() const = 0;
  virtual const ParamLayout& layout() const = 0;
  virtual double log_prior(const Vec& theta) const = 0;
  virtual double log_likelihood(const Vec& theta) const = 0;
  /// log_likelihood + log_prior, -inf outside the support.
  double log_kernel(const Vec& theta) const;

  virtual bool can_sample_prior() const { return false; }
  virtual Vec sample_prior(Rng& rng) const;

  /// Full conditionals in Gibbs sweep order; conditional(b, s) is p(theta_b | rest, latent, y).
  virtual bool has_conditionals() const { return false; }
  virtual BlockDensityPtr conditional(std::size_t block, const ChainState& state) const;
  virtual Eigen::Index latent_dim() const { return 0; }
  /// Draw latents given theta (Gibbs step after the parameter blocks).
  virtual Vec sample_latent(const Vec& theta, Rng& rng) const;
  /// A reasonable chain starting point.
  virtual ChainState initial_state() const;

  virtual PosteriorDrawSet sample_posterior(const ChainConfig& config, std::uint64_t seed) const;
  virtual VBResult fit_vb(const VbConfig& config) const;
  virtual std::optional<double> exact_log_mdd() const { return std::nullopt; }
};

using KernelPtr = std::shared_ptr<const ModelKernel>;

/// Runs the conditional-by-conditional Gibbs sampler. Blocks before
/// `first_free` stay at their values in `init` (Chib's reduced runs).
PosteriorDrawSet run_gibbs(const ModelKernel& model, ChainState init, const ChainConfig& config, std::uint64_t seed,
                           std::size_t first_free = 0);

/// One sweep in place.
void gibbs_sweep(const ModelKernel& model, ChainState& state, Rng& rng, std::size_t first_free = 0);

}  // namespace vbmdd
