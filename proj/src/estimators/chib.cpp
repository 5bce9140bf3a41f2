#include <cmath>
#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

Vec chib_default_point(const ModelKernel& model, const PosteriorDrawSet& draws) {
  const ParamLayout& layout = model.layout();
  if (draws.size() < 1) throw ArgumentError("chib: empty draw set");
  Vec point(layout.size());
  for (std::size_t m = 0; m < layout.blocks().size(); ++m) {
    const Block& b = layout.block(m);
    const auto rows = draws.theta.middleRows(b.offset, b.size);
    if (b.support == Support::Positive)
      layout.assign(point, m, rows.array().log().rowwise().mean().exp().matrix());
    else
      layout.assign(point, m, rows.rowwise().mean());
  }
  return point;
}

MddEstimate chib_estimate(const ModelKernel& model, const ChainEvaluation& chain, const ChibOptions& opts,
                          std::uint64_t seed, const Vec* theta_star) {
  if (!model.has_conditionals()) throw UnsupportedError(model.name() + ": Chib's estimator needs full conditionals");
  const PosteriorDrawSet& d = *chain.draws;
  const ParamLayout& layout = model.layout();
  const Vec star = theta_star ? *theta_star : chib_default_point(model, d);
  if (!layout.in_support(star)) throw ArgumentError("chib: evaluation point is outside the support");
  const double log_kernel = model.log_kernel(star);
  if (!std::isfinite(log_kernel)) throw EstimationError("chib: kernel is zero at the evaluation point");

  MddEstimate est;
  est.method = "chib";
  est.draws_s = d.size();
  const std::size_t M = layout.blocks().size();
  std::vector<double> terms;
  double log_ordinate = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const Vec x = layout.slice(star, m);
    terms.clear();
    if (m == 0) {
      for (Eigen::Index s = 0; s < d.size(); ++s) terms.push_back(model.conditional(0, d.state(s))->log_pdf(x));
    } else if (m + 1 == M && model.latent_dim() == 0) {
      // Everything the last conditional depends on is fixed at theta*.
      terms.push_back(model.conditional(m, ChainState{star, Vec()})->log_pdf(x));
    } else {
      ChainState init = d.state(d.size() - 1);
      for (std::size_t k = 0; k < m; ++k) layout.assign(init.theta, k, layout.slice(star, k));
      ChainConfig cfg;
      cfg.draws = opts.reduced_run_length > 0 ? opts.reduced_run_length : static_cast<int>(d.size());
      cfg.burn_in = opts.reduced_burn_in;
      const PosteriorDrawSet run = run_gibbs(model, init, cfg, Rng::derive_seed(seed, {m}), m);
      est.draws_o += run.size();
      for (Eigen::Index s = 0; s < run.size(); ++s) terms.push_back(model.conditional(m, run.state(s))->log_pdf(x));
    }
    const double ord = log_sum_exp(terms) - std::log(static_cast<double>(terms.size()));
    if (!std::isfinite(ord)) throw EstimationError("chib: posterior ordinate of block '" + layout.block(m).name +
                                                   "' is not finite");
    est.extras.emplace_back("log_ordinate_" + layout.block(m).name, ord);
    log_ordinate += ord;
  }
  est.log_mdd = log_kernel - log_ordinate;
  est.extras.emplace_back("log_kernel_at_point", log_kernel);
  return est;
}

}  // namespace vbmdd
