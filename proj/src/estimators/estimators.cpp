#include "vbmdd/estimators/estimators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_mean_exp(const std::vector<double>& v) {
  return log_sum_exp(v) - std::log(static_cast<double>(v.size()));
}
}  // namespace

ChainEvaluation evaluate_chain(const ModelKernel& model, const PosteriorDrawSet& draws) {
  ChainEvaluation ev;
  ev.draws = &draws;
  const auto n = static_cast<std::size_t>(draws.size());
  ev.log_prior.resize(n);
  ev.log_likelihood.resize(n);
  ev.log_kernel.resize(n);
  const ParamLayout& layout = model.layout();
  for (std::size_t s = 0; s < n; ++s) {
    const Vec theta = draws.draw(static_cast<Eigen::Index>(s));
    if (!layout.in_support(theta)) {
      ev.log_prior[s] = ev.log_likelihood[s] = ev.log_kernel[s] = -kInf;
      continue;
    }
    ev.log_prior[s] = model.log_prior(theta);
    ev.log_likelihood[s] = ev.log_prior[s] == -kInf ? -kInf : model.log_likelihood(theta);
    ev.log_kernel[s] = ev.log_prior[s] + ev.log_likelihood[s];
  }
  return ev;
}

MddEstimate ris_estimate(const ChainEvaluation& chain, const WeightingDensity& h) {
  const PosteriorDrawSet& d = *chain.draws;
  MddEstimate est;
  est.method = "ris-" + h.tag();
  est.draws_s = d.size();
  est.log_terms.resize(static_cast<std::size_t>(d.size()));
  for (Eigen::Index s = 0; s < d.size(); ++s) {
    const double lk = chain.log_kernel[static_cast<std::size_t>(s)];
    if (!std::isfinite(lk)) throw EstimationError(est.method + ": chain draw " + std::to_string(s) + " has zero kernel");
    est.log_terms[static_cast<std::size_t>(s)] = h.log_density(d.draw(s)) - lk;
  }
  const double lse = log_mean_exp(est.log_terms);
  if (lse == -kInf) throw EstimationError(est.method + ": weighting density is zero at every chain draw");
  est.log_mdd = -lse;
  return est;
}

double bridge_step(const std::vector<double>& l_post, const std::vector<double>& l_g, double log_r) {
  const double n1 = static_cast<double>(l_post.size()), n2 = static_cast<double>(l_g.size());
  const double ls1 = std::log(n1 / (n1 + n2)), ls2 = std::log(n2 / (n1 + n2));
  std::vector<double> num(l_g.size()), den(l_post.size());
  for (std::size_t j = 0; j < l_g.size(); ++j) num[j] = l_g[j] - log_add_exp(ls1 + l_g[j], ls2 + log_r);
  for (std::size_t j = 0; j < l_post.size(); ++j) den[j] = -log_add_exp(ls1 + l_post[j], ls2 + log_r);
  return (log_sum_exp(num) - std::log(n2)) - (log_sum_exp(den) - std::log(n1));
}

MddEstimate bs_estimate(const ModelKernel& model, const ChainEvaluation& chain, const WeightingDensity& g,
                        const BridgeOptions& opts, Rng& rng) {
  if (!g.can_sample()) throw UnsupportedError("bridge sampling needs a weighting density that can be sampled");
  const PosteriorDrawSet& d = *chain.draws;
  MddEstimate est;
  est.method = "bs-" + g.tag();
  est.draws_s = d.size();
  est.draws_o = opts.draws_o > 0 ? opts.draws_o : d.size();
  std::vector<double> l_post(static_cast<std::size_t>(d.size())), l_g(static_cast<std::size_t>(est.draws_o));
  for (Eigen::Index s = 0; s < d.size(); ++s)
    l_post[static_cast<std::size_t>(s)] = chain.log_kernel[static_cast<std::size_t>(s)] - g.log_density(d.draw(s));
  for (auto& v : l_g) {
    const Vec th = g.sample(rng);
    v = model.log_kernel(th) - g.log_density(th);
  }
  // Start from RIS with h = g.
  std::vector<double> neg(l_post.size());
  for (std::size_t s = 0; s < l_post.size(); ++s) neg[s] = -l_post[s];
  double lr = -log_mean_exp(neg);
  if (!std::isfinite(lr)) lr = 0.0;
  est.trace.push_back(lr);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double next = bridge_step(l_post, l_g, lr);
    if (!std::isfinite(next)) throw EstimationError(est.method + ": recursion produced a non-finite value");
    est.trace.push_back(next);
    const double delta = std::abs(next - lr);
    lr = next;
    if (delta < opts.tol) {
      est.iterations = it;
      est.log_mdd = lr;
      est.log_terms = std::move(neg);
      return est;
    }
  }
  std::ostringstream msg;
  msg << est.method << ": no convergence in " << opts.max_iter << " iterations; last iterates";
  for (std::size_t k = est.trace.size() >= 3 ? est.trace.size() - 3 : 0; k < est.trace.size(); ++k)
    msg << ' ' << est.trace[k];
  throw EstimationError(msg.str());
}

MddEstimate is_estimate(const ModelKernel& model, const WeightingDensity& f, Eigen::Index draws_r, Rng& rng) {
  if (draws_r < 1) throw ArgumentError("importance sampling needs at least one draw");
  MddEstimate est;
  est.method = "is-" + f.tag();
  est.draws_o = draws_r;
  est.log_terms.resize(static_cast<std::size_t>(draws_r));
  for (auto& v : est.log_terms) {
    const Vec th = f.sample(rng);
    v = model.log_kernel(th) - f.log_density(th);
  }
  est.log_mdd = log_mean_exp(est.log_terms);
  if (!std::isfinite(est.log_mdd)) throw EstimationError(est.method + ": all importance weights are zero");
  return est;
}

MddEstimate chm_estimate(const ModelKernel& model, const ChainEvaluation& chain, Eigen::Index draws_r, Rng& rng) {
  if (draws_r < 1000) throw ArgumentError("chm: at least 1000 importance draws are required");
  const PosteriorDrawSet& d = *chain.draws;
  const ParamLayout& layout = model.layout();
  const Eigen::Index n = layout.size(), S = d.size();
  Mat psi(n, S);
  for (Eigen::Index s = 0; s < S; ++s) psi.col(s) = layout.to_unconstrained(d.draw(s));
  const Vec lo = psi.rowwise().minCoeff(), hi = psi.rowwise().maxCoeff();
  const Vec mean = psi.rowwise().mean();
  const Mat centered = psi.colwise() - mean;
  const MvNormal g(mean, symmetrize(centered * centered.transpose() / static_cast<double>(S)));

  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(draws_r));
  for (Eigen::Index r = 0; r < draws_r; ++r) {
    const Vec x = g.sample(rng);
    if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any()) {
      w.push_back(-kInf);
      continue;
    }
    const Vec th = layout.to_constrained(x);
    w.push_back(layout.in_support(th) ? model.log_prior(th) + layout.log_jacobian(x) - g.log_pdf(x) : -kInf);
  }
  const double log_pa = log_mean_exp(w);
  if (log_pa == -kInf) throw EstimationError("chm: estimated prior probability of the box is zero");
  std::vector<double> neg(chain.log_likelihood.size());
  for (std::size_t s = 0; s < neg.size(); ++s) neg[s] = -chain.log_likelihood[s];
  MddEstimate est;
  est.method = "chm";
  est.draws_s = S;
  est.draws_o = draws_r;
  est.log_mdd = log_pa - log_mean_exp(neg);
  est.log_terms = std::move(neg);
  est.extras.emplace_back("log_prior_box_probability", log_pa);
  return est;
}

}  // namespace vbmdd
