#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "sfm_quadrature.hpp"
#include "vbmdd/diagnostics.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/models/sfm.hpp"
#include "vbmdd/stats/distributions.hpp"
#include "vbmdd/stats/quadrature.hpp"
#include "vbmdd/stats/special.hpp"

using namespace vbmdd;
using namespace oracle;

namespace {

SfmData small_panel(std::uint64_t seed, Inefficiency family = Inefficiency::Exponential, Eigen::Index N = 20,
                    Eigen::Index T = 4, int sign = -1, double theta = 1.0) {
  SfmTrueParams truth;
  truth.beta = Vec(2);
  truth.beta << 1.0, 0.5;
  truth.sigma = 0.2;
  truth.lambda = 4.0;
  truth.theta = theta;
  return sfm_synthetic(seed, N, T, 2, family, truth, sign);
}

std::pair<double, double> mean_and_se(const Mat& draws, Eigen::Index row) {
  std::vector<double> v(draws.cols());
  for (Eigen::Index s = 0; s < draws.cols(); ++s) v[s] = draws(row, s);
  double m = 0.0;
  for (double x : v) m += x / static_cast<double>(v.size());
  return {m, batch_means_se(v, 50)};
}

}  // namespace

TEST_CASE("sfm exponential integrated likelihood matches per-firm quadrature") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int sign = rep % 2 ? 1 : -1;
    const SfmData d = small_panel(100 + rep, Inefficiency::Exponential, 3, 1 + rep % 5, sign);
    Vec beta(2);
    beta << 1.0 + 0.3 * rng.normal(), 0.5 + 0.3 * rng.normal();
    const double h = std::exp(std::log(25.0) + rng.normal());
    const double lambda = std::exp(std::log(4.0) + rng.normal());
    const double closed = sfm_exp_integrated_loglik(d, beta, h, lambda);
    const double quad =
        integrated_by_quadrature(d, beta, h, [&](double u) { return std::log(lambda) - lambda * u; });
    INFO("rep " << rep);
    CHECK(closed == doctest::Approx(quad).epsilon(1e-10).scale(1.0));
    CHECK(std::abs(closed - quad) < 1e-8);
  }
}

TEST_CASE("sfm exponential integrated likelihood limits") {
  const SfmData d = small_panel(3, Inefficiency::Exponential, 4, 3);
  Vec beta(2);
  beta << 1.0, 0.5;
  const double h = 20.0;
  const Vec e = d.y - d.x * beta;
  double normal_only = 0.0;
  for (Eigen::Index r = 0; r < e.size(); ++r) normal_only += 0.5 * std::log(h) - 0.5 * kLnTwoPi - 0.5 * h * e(r) * e(r);
  CHECK(sfm_exp_integrated_loglik(d, beta, h, 1e9) == doctest::Approx(normal_only).epsilon(1e-6));
  CHECK(sfm_exp_integrated_loglik(d, beta, -1.0, 2.0) == -std::numeric_limits<double>::infinity());

  // One observation: the normal-exponential convolution density.
  SfmData one;
  one.N = 1;
  one.T = 1;
  one.x = Mat::Ones(1, 1);
  one.y = Vec::Constant(1, -0.3);
  const double sigma = 0.4, lambda = 2.0;
  const Vec b0 = Vec::Zero(1);
  const double eps = -0.3;
  const double textbook = std::log(lambda) + lambda * eps + 0.5 * lambda * lambda * sigma * sigma +
                          log_normal_cdf(-eps / sigma - lambda * sigma);
  CHECK(sfm_exp_integrated_loglik(one, b0, 1.0 / (sigma * sigma), lambda) == doctest::Approx(textbook).epsilon(1e-12));
}

TEST_CASE("sfm gamma integrated likelihood matches quadrature and nests the exponential") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int sign = rep % 2 ? 1 : -1;
    const SfmData d = small_panel(300 + rep, Inefficiency::Gamma, 3, 1 + rep % 4, sign, 2.0);
    Vec beta(2);
    beta << 1.0 + 0.2 * rng.normal(), 0.5 + 0.2 * rng.normal();
    const double h = std::exp(std::log(25.0) + 0.5 * rng.normal());
    const double lambda = std::exp(std::log(4.0) + 0.5 * rng.normal());
    const double theta = std::exp(0.8 * rng.normal());
    const double closed = sfm_gamma_integrated_loglik(d, beta, h, lambda, theta);
    const Vec e = d.y - d.x * beta;
    double quad = 0.0;
    for (Eigen::Index i = 0; i < d.N; ++i)
      quad += log_integral([&](double u) {
        double v = theta * std::log(lambda) - std::lgamma(theta) + (theta - 1.0) * std::log(u) - lambda * u;
        for (Eigen::Index t = 0; t < d.T; ++t) {
          const double r = e(i * d.T + t) - d.sign * u;
          v += 0.5 * std::log(h) - 0.5 * kLnTwoPi - 0.5 * h * r * r;
        }
        return v;
      });
    INFO("rep " << rep << " theta " << theta);
    CHECK(std::abs(closed - quad) < 1e-7);
    CHECK(sfm_gamma_integrated_loglik(d, beta, h, lambda, 1.0) ==
          doctest::Approx(sfm_exp_integrated_loglik(d, beta, h, lambda)).epsilon(1e-10));
  }
}

TEST_CASE("truncated normal moments against quadrature") {
  for (double r = -6.0; r <= 6.0; r += 0.5) {
    const double scale = 0.7;
    const TruncNormal tn(r * scale, scale);
    auto lp = [&](double u) { return tn.log_pdf(u); };
    const double m1 = expect_quadrature(lp, [](double u) { return u; });
    const double m2 = expect_quadrature(lp, [](double u) { return u * u; });
    INFO("r = " << r);
    CHECK(tn.mean() == doctest::Approx(m1).epsilon(1e-9));
    CHECK(tn.variance() == doctest::Approx(m2 - m1 * m1).epsilon(1e-7));
  }
}

TEST_CASE("pcf density: normalization, moments and log moment by quadrature") {
  for (double shape : {0.4, 1.0, 2.5, 8.0})
    for (double upsilon : {0.5, 3.0, 20.0})
      for (double mu : {-30.0, -2.0, 0.0, 4.0, 60.0}) {
        const PcfDensity q(shape, upsilon, mu);
        auto lp = [&](double u) { return q.log_pdf(u); };
        INFO("shape " << shape << " upsilon " << upsilon << " mu " << mu);
        CHECK(expect_quadrature(lp, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(q.moment(1) == doctest::Approx(expect_quadrature(lp, [](double u) { return u; })).epsilon(1e-8));
        CHECK(q.moment(2) == doctest::Approx(expect_quadrature(lp, [](double u) { return u * u; })).epsilon(1e-8));
        const double el = expect_quadrature(lp, [](double u) { return std::log(u); }, {1.0});
        CHECK(std::abs(q.mean_log() - el) < 1e-7 * std::max(1.0, std::abs(el)));
      }
}

TEST_CASE("pcf density with unit shape is the truncated normal") {
  for (double mu : {-5.0, 0.3, 7.0}) {
    const double upsilon = 2.0;
    const PcfDensity q(1.0, upsilon, mu);
    const TruncNormal tn(-mu / (upsilon * upsilon), 1.0 / upsilon);
    CHECK(q.moment(1) == doctest::Approx(tn.mean()).epsilon(1e-9));
    CHECK(q.moment(2) - q.moment(1) * q.moment(1) == doctest::Approx(tn.variance()).epsilon(1e-8));
    CHECK(q.entropy() == doctest::Approx(tn.entropy()).epsilon(1e-8));
    CHECK(q.log_pdf(0.37) == doctest::Approx(tn.log_pdf(0.37)).epsilon(1e-10));
  }
}

TEST_CASE("sfm exponential vb: counts, closed form bound and monotone trace") {
  const SfmData d = small_panel(21, Inefficiency::Exponential, 43, 4);
  const SfmExpPrior prior = SfmExpPrior::standard(2);
  const SfmExpVb vb = sfm_exp_vb(prior, d);
  CHECK(vb.converged);
  CHECK(vb.a_sigma == 87.0);
  CHECK(vb.a_lambda == 44.0);
  CHECK(sfm_exp_vblb(prior, d, vb) == doctest::Approx(sfm_exp_elbo_terms(prior, d, vb)).epsilon(1e-12));
  for (std::size_t i = 1; i < vb.elbo_trace.size(); ++i) CHECK(vb.elbo_trace[i] >= vb.elbo_trace[i - 1] - 1e-10);
}

TEST_CASE("sfm exponential vb bound matches a Monte Carlo ELBO on the complete-data kernel") {
  const SfmData d = small_panel(22, Inefficiency::Exponential, 15, 4);
  const SfmExpModel cdl(d, SfmExpPrior::standard(2), true);
  const VBResult vb = cdl.fit_vb({});
  Rng rng(4);
  const int n = 40000;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const Vec th = vb.q->sample(rng);
    v[i] = cdl.log_kernel(th) - vb.q->log_density(th);
  }
  double m = 0.0;
  for (double x : v) m += x / n;
  const double se = nse(v) / std::sqrt(double(n));
  CHECK(std::abs(m - vb.elbo) < 4.0 * se);
}

TEST_CASE("sfm exponential gibbs") {
  const SfmData d = small_panel(23, Inefficiency::Exponential, 30, 4);
  const SfmExpModel model(d, SfmExpPrior::standard(2));
  ChainConfig cfg;
  cfg.draws = 4000;
  cfg.burn_in = 500;
  const PosteriorDrawSet a = model.sample_posterior(cfg, 9);
  const PosteriorDrawSet b = model.sample_posterior(cfg, 9);
  CHECK(a.theta == b.theta);
  CHECK(a.latent == b.latent);
  CHECK((a.latent.array() > 0.0).all());

  const SfmExpVb vb = sfm_exp_vb(model.prior(), d);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const auto [m, se] = mean_and_se(a.theta, j);
    INFO("beta " << j << " chain " << m << " vb " << vb.beta(j) << " se " << se);
    CHECK(std::abs(m - vb.beta(j)) < 3.0 * se + 0.01);
  }

  SfmExpPrior tight = SfmExpPrior::standard(2);
  tight.beta << 0.7, -0.2;
  tight.V = 1e-12 * Mat::Identity(2, 2);
  const PosteriorDrawSet c = SfmExpModel(d, tight).sample_posterior(cfg, 3);
  CHECK((c.theta.row(0).array() - 0.7).abs().maxCoeff() < 1e-4);
  CHECK((c.theta.row(1).array() + 0.2).abs().maxCoeff() < 1e-4);
}

TEST_CASE("sfm exponential: integrated and complete-data kernels give the same evidence") {
  const SfmData d = small_panel(24, Inefficiency::Exponential, 20, 4);
  const SfmExpPrior prior = SfmExpPrior::standard(2);
  const SfmExpModel integ(d, prior), cdl(d, prior, true);
  ChainConfig cfg;
  cfg.draws = 10000;
  cfg.burn_in = 1000;
  const PosteriorDrawSet pi = integ.sample_posterior(cfg, 1);
  const PosteriorDrawSet pc = cdl.sample_posterior(cfg, 2);
  const ChainEvaluation ei = evaluate_chain(integ, pi), ec = evaluate_chain(cdl, pc);
  const VBResult vi = integ.fit_vb({}), vc = cdl.fit_vb({});
  const MddEstimate ri = ris_estimate(ei, *make_vb_weighting(vi));
  const MddEstimate rc = ris_estimate(ec, *make_vb_weighting(vc));
  Rng rng(3);
  const MddEstimate bi = bs_estimate(integ, ei, *make_vb_weighting(vi), {}, rng);
  const MddEstimate ch = chib_estimate(integ, ei, {}, 77);
  INFO("ris integrated " << ri.log_mdd << " ris cdl " << rc.log_mdd << " bs " << bi.log_mdd << " chib "
                         << ch.log_mdd << " elbo " << vi.elbo);
  CHECK(std::abs(ri.log_mdd - bi.log_mdd) < 0.05);
  CHECK(std::abs(ch.log_mdd - bi.log_mdd) < 0.05);
  CHECK(std::abs(rc.log_mdd - bi.log_mdd) < 0.3);
  CHECK(vi.elbo == doctest::Approx(vc.elbo).epsilon(1e-12));
  CHECK(vi.elbo < bi.log_mdd);
}

TEST_CASE("sfm gamma vb") {
  const SfmData d = small_panel(25, Inefficiency::Gamma, 30, 4, -1, 2.0);
  const SfmGammaPrior prior = SfmGammaPrior::standard(2);
  const SfmGammaVb vb = sfm_gamma_vb(prior, d);
  CHECK(vb.converged);
  CHECK(vb.a_sigma == 1.0 + 0.5 * 120.0);
  CHECK(vb.a_lambda == doctest::Approx(31.0 * vb.theta_mean).epsilon(1e-12));
  for (std::size_t i = 1; i < vb.elbo_trace.size(); ++i) {
    INFO("step " << i);
    CHECK(vb.elbo_trace[i] >= vb.elbo_trace[i - 1] - 1e-8);
  }
  CHECK(sfm_gamma_elbo(prior, d, vb) == doctest::Approx(vb.elbo_trace.back()).epsilon(1e-12));
  CHECK(vb.q_theta->edge_mass(1) < 1e-10);
}

TEST_CASE("sfm gamma vb with theta pinned at one reproduces the exponential fit") {
  const SfmData d = small_panel(26, Inefficiency::Exponential, 25, 4);
  SfmGammaPrior gp = SfmGammaPrior::standard(2);
  gp.a_theta = gp.b_theta = 1e7;
  SfmExpPrior ep = SfmExpPrior::standard(2);
  ep.a_lambda = 1.0;
  const SfmGammaVb g = sfm_gamma_vb(gp, d, 1e-9);
  const SfmExpVb e = sfm_exp_vb(ep, d, 1e-10);
  CHECK(g.theta_mean == doctest::Approx(1.0).epsilon(1e-5));
  CHECK((g.beta - e.beta).norm() < 1e-4);
  CHECK(g.elbo_trace.back() == doctest::Approx(e.elbo_trace.back()).epsilon(1e-4));
}

TEST_CASE("sfm gamma sampler") {
  const SfmData d = small_panel(27, Inefficiency::Gamma, 20, 4, -1, 2.0);
  const SfmGammaModel model(d, SfmGammaPrior::standard(2));
  ChainConfig cfg;
  cfg.draws = 3000;
  cfg.burn_in = 1000;
  const PosteriorDrawSet a = model.sample_posterior(cfg, 5);
  const PosteriorDrawSet b = model.sample_posterior(cfg, 5);
  CHECK(a.theta == b.theta);
  CHECK(a.warnings.empty());
  CHECK((a.latent.rowwise().mean().array() > 0.0).all());
}

TEST_CASE("sfm gamma sampler with theta pinned at one matches the exponential gibbs sampler") {
  const SfmData d = small_panel(28, Inefficiency::Exponential, 20, 4);
  SfmGammaPrior gp = SfmGammaPrior::standard(2);
  gp.a_theta = gp.b_theta = 1e7;
  SfmExpPrior ep = SfmExpPrior::standard(2);
  ep.a_lambda = 1.0;
  ChainConfig cfg;
  cfg.draws = 20000;
  cfg.burn_in = 2000;
  const PosteriorDrawSet g = SfmGammaModel(d, gp).sample_posterior(cfg, 6);
  const PosteriorDrawSet e = SfmExpModel(d, ep).sample_posterior(cfg, 7);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto [mg, sg] = mean_and_se(g.theta, j);
    const auto [me, se] = mean_and_se(e.theta, j);
    INFO("param " << j << " mh " << mg << " gibbs " << me);
    CHECK(std::abs(mg - me) < 3.5 * std::hypot(sg, se));
  }
  CHECK(std::abs(g.theta.row(5).mean() - 1.0) < 1e-2);
}

TEST_CASE("sfm gamma evidence: ris and bridge agree and the bound holds") {
  const SfmData d = small_panel(29, Inefficiency::Gamma, 15, 4, -1, 2.0);
  const SfmGammaModel model(d, SfmGammaPrior::standard(2));
  ChainConfig cfg;
  cfg.draws = 5000;
  cfg.burn_in = 1000;
  const PosteriorDrawSet draws = model.sample_posterior(cfg, 8);
  const ChainEvaluation ev = evaluate_chain(model, draws);
  const VBResult vb = model.fit_vb({});
  const WeightingPtr q = make_vb_weighting(vb);
  const MddEstimate r = ris_estimate(ev, *q);
  Rng rng(2);
  BridgeOptions bo;
  bo.draws_o = 2000;
  const MddEstimate b = bs_estimate(model, ev, *q, bo, rng);
  INFO("ris " << r.log_mdd << " bs " << b.log_mdd << " elbo " << vb.elbo);
  CHECK(std::abs(r.log_mdd - b.log_mdd) < 0.1);
  CHECK(vb.elbo < b.log_mdd + 0.05);
}

TEST_CASE("sfm synthetic data") {
  SfmTrueParams truth;
  truth.beta = Vec::Constant(1, 2.0);
  truth.sigma = 0.1;
  truth.lambda = 5.0;
  const SfmData d = sfm_synthetic(1, 10000, 1, 1, Inefficiency::Exponential, truth);
  CHECK((2.0 - d.y.array()).mean() == doctest::Approx(0.2).epsilon(0.05));
  const SfmData d2 = sfm_synthetic(1, 10000, 1, 1, Inefficiency::Exponential, truth);
  CHECK(d.y == d2.y);
  truth.lambda = 1e8;
  const SfmData flat = sfm_synthetic(2, 20000, 1, 1, Inefficiency::Exponential, truth);
  const Eigen::ArrayXd r = flat.y.array() - flat.y.mean();
  const double skew = (r.cube().mean()) / std::pow(r.square().mean(), 1.5);
  CHECK(std::abs(skew) < 0.05);
  truth.sigma = -1.0;
  CHECK_THROWS_AS(sfm_synthetic(1, 10, 2, 1, Inefficiency::Exponential, truth), ArgumentError);
}
