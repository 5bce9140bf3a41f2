#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "sfm_common.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/models/sfm.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

using namespace sfm_detail;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kGridNodes = 2001;

// ln of the density of s = ln theta under q(theta) proportional to
// exp(c theta - n ln Gamma(theta) - (a + 1) ln theta - b / theta).
double theta_log_target(double s, double c, double n, double a, double b) {
  const double th = std::exp(s);
  return c * th - n * std::lgamma(th) - a * s - b * std::exp(-s);
}

std::shared_ptr<const LogGridDensity> grid_on(double lo, double hi, double c, double n, double a, double b) {
  std::vector<double> lx(kGridNodes), lg(kGridNodes);
  for (int j = 0; j < kGridNodes; ++j) {
    lx[j] = lo + (hi - lo) * j / (kGridNodes - 1);
    lg[j] = theta_log_target(lx[j], c, n, a, b);
  }
  return std::make_shared<LogGridDensity>(std::move(lx), std::move(lg));
}

// Starts on ln theta in [-10, 10]; if the mass spans only a few cells the grid is
// re-centred on it, and it is widened while more than 1e-10 sits in the edge cells.
std::shared_ptr<const LogGridDensity> fit_theta_grid(double c, double n, double a, double b) {
  double lo = -10.0, hi = 10.0;
  auto q = grid_on(lo, hi, c, n, a, b);
  for (int pass = 0; pass < 8; ++pass) {
    const double m = q->mean_log();
    const double sd = std::sqrt(std::max(q->expect_log_space([m](double l) { return (l - m) * (l - m); }), 0.0));
    const double cell = (hi - lo) / (kGridNodes - 1);
    const bool coarse = sd < 20.0 * cell;
    const bool edge = q->edge_mass(1) > 1e-10;
    if (!coarse && !edge) return q;
    if (coarse) {
      const double w = std::max(40.0 * std::max(sd, cell), 1e-6);
      lo = m - w;
      hi = m + w;
    } else {
      const double w = hi - lo;
      lo -= 0.5 * w;
      hi += 0.5 * w;
      if (hi - lo > 200.0) throw NumericError("SFM gamma: q(theta) mass does not fit on the ln theta grid");
    }
    q = grid_on(lo, hi, c, n, a, b);
  }
  if (q->edge_mass(1) > 1e-10) throw NumericError("SFM gamma: q(theta) grid could not be placed");
  return q;
}

struct GammaUMoments {
  Vec u1, u2, elog;
  double entropy = 0.0;
};

GammaUMoments u_moments(double shape, double upsilon, const Vec& mu) {
  GammaUMoments m{Vec(mu.size()), Vec(mu.size()), Vec(mu.size())};
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const PcfDensity q(shape, upsilon, mu(i));
    m.u1(i) = q.moment(1);
    m.u2(i) = q.moment(2);
    m.elog(i) = q.mean_log();
    m.entropy -= (shape - 1.0) * m.elog(i) - 0.5 * upsilon * upsilon * m.u2(i) - mu(i) * m.u1(i) - q.log_norm();
  }
  return m;
}

double elbo_from_parts(const SfmGammaPrior& prior, const SfmData& d, const PanelStats& st, const SfmGammaVb& q,
                       const GammaUMoments& u) {
  const double N = static_cast<double>(d.N), T = static_cast<double>(d.T);
  const GammaDist qh(q.a_sigma, q.b_sigma), ql(q.a_lambda, q.b_lambda);
  const double elh = qh.expected_log(), ell = ql.expected_log();
  const LogGridDensity& qt = *q.q_theta;
  const double th = qt.mean(), elt = qt.mean_log(), eit = qt.mean_inverse();
  const double elg = qt.expect_log_space([](double l) { return std::lgamma(std::exp(l)); });

  double v = -0.5 * N * T * kLnTwoPi + 0.5 * N * T * elh -
             0.5 * qh.mean() * expected_sse(d, st, q.beta, q.V, u.u1, u.u2);
  const MvNormal pb(prior.beta, prior.V);
  v += pb.log_pdf(q.beta) - 0.5 * (pb.factor().inverse().array() * q.V.array()).sum();
  v += prior.a_sigma * std::log(prior.b_sigma) - std::lgamma(prior.a_sigma) + (prior.a_sigma - 1.0) * elh -
       prior.b_sigma * qh.mean();
  v += th * std::log(prior.b_lambda) - elg + (th - 1.0) * ell - prior.b_lambda * ql.mean();
  v += N * th * ell - N * elg + (th - 1.0) * u.elog.sum() - ql.mean() * u.u1.sum();
  v += prior.a_theta * std::log(prior.b_theta) - std::lgamma(prior.a_theta) - (prior.a_theta + 1.0) * elt -
       prior.b_theta * eit;
  v += MvNormal(q.beta, q.V).entropy() + qh.entropy() + ql.entropy() + u.entropy + qt.entropy();
  return v;
}

}  // namespace

double sfm_gamma_elbo(const SfmGammaPrior& prior, const SfmData& data, const SfmGammaVb& q) {
  if (!q.q_theta) throw ArgumentError("sfm_gamma_elbo: q(theta) missing");
  return elbo_from_parts(prior, data, panel_stats(data), q, u_moments(q.u_shape, q.upsilon, q.mu));
}

SfmGammaVb sfm_gamma_vb(const SfmGammaPrior& prior, const SfmData& data, double tol, int max_iter) {
  data.validate();
  prior.validate(data.k());
  if (!(tol > 0.0) || max_iter < 1) throw ArgumentError("sfm_gamma_vb: need tol > 0 and max_iter >= 1");
  const PanelStats st = panel_stats(data);
  const Mat prior_prec = inverse_spd(prior.V, "SFM beta prior covariance");
  const double N = static_cast<double>(data.N), T = static_cast<double>(data.T);

  // Start from the exponential special case (theta = 1).
  SfmExpPrior ep;
  ep.beta = prior.beta;
  ep.V = prior.V;
  ep.a_sigma = prior.a_sigma;
  ep.b_sigma = prior.b_sigma;
  ep.a_lambda = 1.0;
  ep.b_lambda = prior.b_lambda;
  const SfmExpVb e = sfm_exp_vb(ep, data, 1e-6, 200);

  SfmGammaVb q;
  q.beta = e.beta;
  q.V = e.V;
  q.a_sigma = prior.a_sigma + 0.5 * N * T;
  q.b_sigma = e.b_sigma;
  q.a_lambda = e.a_lambda;
  q.b_lambda = e.b_lambda;
  q.theta_mean = 1.0;

  double last = -kInf;
  for (int it = 1; it <= max_iter; ++it) {
    const double h = q.a_sigma / q.b_sigma, lambda = q.a_lambda / q.b_lambda;
    q.upsilon = std::sqrt(T * h);
    q.mu = (lambda - data.sign * h * firm_residual_sums(data, q.beta).array()).matrix();
    q.u_shape = q.theta_mean;
    GammaUMoments u;
    try {
      u = u_moments(q.u_shape, q.upsilon, q.mu);
    } catch (const NumericError& err) {
      throw NumericError(std::string("SFM gamma q(u) moments: ") + err.what());
    }
    q.beta = update_beta(data, st, prior.beta, prior_prec, h, u.u1, q.V);
    q.b_sigma = prior.b_sigma + 0.5 * expected_sse(data, st, q.beta, q.V, u.u1, u.u2);
    const double ell = boost::math::digamma(q.a_lambda) - std::log(q.b_lambda);
    const double c = std::log(prior.b_lambda) + (N + 1.0) * ell + u.elog.sum();
    q.q_theta = fit_theta_grid(c, N + 1.0, prior.a_theta, prior.b_theta);
    q.theta_mean = q.q_theta->mean();
    q.a_lambda = (N + 1.0) * q.theta_mean;
    q.b_lambda = prior.b_lambda + u.u1.sum();
    const double elbo = elbo_from_parts(prior, data, st, q, u);
    q.elbo_trace.push_back(elbo);
    q.iterations = it;
    if (it > 1 && std::abs(elbo - last) < tol) {
      q.converged = true;
      break;
    }
    last = elbo;
  }
  return q;
}

SfmGammaModel::SfmGammaModel(SfmData data, SfmGammaPrior prior) : data_(std::move(data)), prior_(std::move(prior)) {
  data_.validate();
  prior_.validate(data_.k());
  layout_.add_real("beta", data_.k()).add_positive("h", 1).add_positive("lambda", 1).add_positive("theta", 1);
  beta_prior_ = MvNormal(prior_.beta, prior_.V);
  v_prior_inv_ = symmetrize(beta_prior_.factor().inverse());
  xx_ = data_.x.transpose() * data_.x;
}

double SfmGammaModel::log_prior(const Vec& theta) const {
  const Eigen::Index k = data_.k();
  const double h = theta(k), lambda = theta(k + 1), th = theta(k + 2);
  if (!(h > 0.0) || !(lambda > 0.0) || !(th > 0.0)) return -kInf;
  const double a = prior_.a_theta, b = prior_.b_theta;
  return beta_prior_.log_pdf(theta.head(k)) + GammaDist(prior_.a_sigma, prior_.b_sigma).log_pdf(h) +
         GammaDist(th, prior_.b_lambda).log_pdf(lambda) + a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(th) -
         b / th;
}

double SfmGammaModel::log_likelihood(const Vec& theta) const {
  const Eigen::Index k = data_.k();
  return sfm_gamma_integrated_loglik(data_, theta.head(k), theta(k), theta(k + 1), theta(k + 2));
}

Vec SfmGammaModel::sample_prior(Rng& rng) const {
  const Eigen::Index k = data_.k();
  Vec theta(layout_.size());
  theta.head(k) = beta_prior_.sample(rng);
  theta(k) = GammaDist(prior_.a_sigma, prior_.b_sigma).sample(rng);
  const double th = 1.0 / GammaDist(prior_.a_theta, prior_.b_theta).sample(rng);
  theta(k + 1) = GammaDist(th, prior_.b_lambda).sample(rng);
  theta(k + 2) = th;
  return theta;
}

ChainState SfmGammaModel::initial_state() const {
  const Eigen::Index k = data_.k();
  const Vec beta = ols_beta(data_);
  const double s2 = std::max((data_.y - data_.x * beta).squaredNorm() / static_cast<double>(data_.y.size()), 1e-8);
  Vec theta(layout_.size());
  theta.head(k) = beta;
  theta(k) = 1.0 / s2;
  theta(k + 1) = 1.0 / std::sqrt(s2);
  theta(k + 2) = 1.0;
  return {theta, Vec::Constant(data_.N, std::sqrt(s2))};
}

namespace {

// Random-walk Metropolis on one scalar with a log proposal sd adapted by Robbins-Monro.
struct AdaptiveWalk {
  double log_sd = std::log(0.5);
  long accepted = 0, tried = 0;

  template <class F>
  double step(double x, F&& log_target, Rng& rng, bool adapt, long iter) {
    const double y = x + std::exp(log_sd) * rng.normal();
    const double ratio = log_target(y) - log_target(x);
    const bool accept = std::log(rng.uniform()) < ratio;
    if (adapt) {
      log_sd += ((accept ? 1.0 : 0.0) - 0.44) * std::pow(static_cast<double>(iter + 1), -0.6);
    } else {
      ++tried;
      accepted += accept ? 1 : 0;
    }
    return accept ? y : x;
  }
  double rate() const { return tried ? static_cast<double>(accepted) / static_cast<double>(tried) : 0.0; }
};

}  // namespace

PosteriorDrawSet SfmGammaModel::sample_posterior(const ChainConfig& config, std::uint64_t seed) const {
  if (config.draws < 1 || config.burn_in < 0 || config.thin < 1) throw ArgumentError("chain config: invalid sizes");
  const Eigen::Index k = data_.k(), n_firms = data_.N;
  const double N = static_cast<double>(n_firms), T = static_cast<double>(data_.T);
  Rng rng(seed);
  ChainState s = initial_state();
  Vec& th = s.theta;
  Vec& u = s.latent;
  AdaptiveWalk theta_walk;
  std::vector<AdaptiveWalk> u_walk(static_cast<std::size_t>(n_firms));

  PosteriorDrawSet out;
  out.burn_in = config.burn_in;
  out.thin = config.thin;
  out.seed = seed;
  out.theta.resize(layout_.size(), config.draws);
  out.latent.resize(n_firms, config.draws);
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.draws) * config.thin;
  int kept = 0;
  for (long it = 0; it < total; ++it) {
    const bool adapt = it < config.burn_in;
    try {
      th.head(k) = beta_conditional(data_, xx_, v_prior_inv_, prior_.beta, th(k), u)->sample(rng);
      th(k) = GammaDist(prior_.a_sigma + 0.5 * N * T, prior_.b_sigma + 0.5 * residual_ss(data_, th.head(k), u))
                  .sample(rng);
      th(k + 1) = GammaDist((N + 1.0) * th(k + 2), prior_.b_lambda + u.sum()).sample(rng);
    } catch (const NumericError& e) {
      throw NumericError(name() + " iteration " + std::to_string(it) + ": " + e.what());
    }
    const double h = th(k), lambda = th(k + 1);
    const double c = std::log(prior_.b_lambda) + (N + 1.0) * std::log(lambda) + u.array().log().sum();
    th(k + 2) = std::exp(theta_walk.step(
        std::log(th(k + 2)), [&](double ls) { return theta_log_target(ls, c, N + 1.0, prior_.a_theta, prior_.b_theta); },
        rng, adapt, it));
    const double shape = th(k + 2);
    const Vec ef = firm_residual_sums(data_, th.head(k));
    for (Eigen::Index i = 0; i < n_firms; ++i) {
      const double lin = lambda - data_.sign * h * ef(i);
      auto target = [&](double ls) {
        const double v = std::exp(ls);
        return shape * ls - 0.5 * h * T * v * v - lin * v;
      };
      u(i) = std::exp(u_walk[static_cast<std::size_t>(i)].step(std::log(u(i)), target, rng, adapt, it));
    }
    if (it >= config.burn_in && (it - config.burn_in) % config.thin == config.thin - 1) {
      out.theta.col(kept) = th;
      out.latent.col(kept) = u;
      ++kept;
    }
  }
  auto check = [&](const AdaptiveWalk& w, const std::string& what) {
    const double r = w.rate();
    if (r < 0.05 || r > 0.95) {
      std::ostringstream os;
      os << name() << ": acceptance rate " << r << " for " << what << " outside [0.05, 0.95]";
      out.warnings.push_back(os.str());
    }
  };
  check(theta_walk, "theta");
  for (Eigen::Index i = 0; i < n_firms; ++i) check(u_walk[static_cast<std::size_t>(i)], "u_" + std::to_string(i));
  return out;
}

VBResult SfmGammaModel::fit_vb(const VbConfig& config) const {
  const SfmGammaVb vb = sfm_gamma_vb(prior_, data_, config.tol > 0.0 ? config.tol : 1e-6, config.max_iter);
  std::vector<BlockDensityPtr> factors{std::make_shared<NormalBlock>(vb.beta, vb.V),
                                       std::make_shared<GammaBlock>(vb.a_sigma, vb.b_sigma),
                                       std::make_shared<GammaBlock>(vb.a_lambda, vb.b_lambda), vb.q_theta};
  VBResult r;
  r.q = std::make_shared<ProductDensity>("vb", layout_, factors);
  r.elbo_trace = vb.elbo_trace;
  r.elbo = vb.elbo_trace.back();
  r.iterations = vb.iterations;
  r.converged = vb.converged;
  r.status = vb.converged ? "converged" : "max_iter reached";
  r.hyper = {{"beta", vb.beta},
             {"V", vb.V},
             {"A_sigma", Mat::Constant(1, 1, vb.a_sigma)},
             {"B_sigma", Mat::Constant(1, 1, vb.b_sigma)},
             {"A_lambda", Mat::Constant(1, 1, vb.a_lambda)},
             {"B_lambda", Mat::Constant(1, 1, vb.b_lambda)},
             {"theta_mean", Mat::Constant(1, 1, vb.theta_mean)},
             {"mu", vb.mu},
             {"upsilon", Mat::Constant(1, 1, vb.upsilon)}};
  return r;
}

}  // namespace vbmdd
