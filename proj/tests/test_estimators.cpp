#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracle_models.hpp"
#include "vbmdd/diagnostics.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/models/toy.hpp"
#include "vbmdd/stats/quadrature.hpp"
#include "vbmdd/stats/special.hpp"

using namespace vbmdd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

GaussianMeanToy::Spec toy_spec(std::uint64_t seed, int n = 30) {
  GaussianMeanToy::Spec s;
  s.y = GaussianMeanToy::simulate(n, 0.7, 1.3, seed);
  s.sigma = 1.3;
  s.prior_mean = 0.0;
  s.prior_var = 2.0;
  return s;
}

PosteriorDrawSet draws_of(std::initializer_list<double> v) {
  PosteriorDrawSet d;
  d.theta.resize(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d.theta(0, i++) = x;
  return d;
}

oracle::TwoGroupNormal two_group(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> y1(20), y2(25);
  for (auto& v : y1) v = 1.0 + 0.8 * rng.normal();
  for (auto& v : y2) v = -0.5 + 0.8 * rng.normal();
  return oracle::TwoGroupNormal(y1, y2);
}

double integrate_scalar_weighting(const WeightingDensity& w, double lo, double hi, std::vector<double> breaks,
                                  double tol = 1e-11) {
  QuadratureOptions o;
  o.rel_tol = tol;
  o.max_levels = 40;
  o.breakpoints = std::move(breaks);
  return std::exp(quadrature_1d([&](double x) { return w.log_density(Vec::Constant(1, x)); }, lo, hi, o));
}
}  // namespace

TEST_CASE("ris, is and bs are exact with the exact posterior as weighting") {
  const GaussianMeanToy toy(toy_spec(11));
  const double exact = *toy.exact_log_mdd();
  const PosteriorDrawSet d = toy.sample_posterior({2000, 100, 1}, 5);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const WeightingPtr q = make_vb_weighting(toy.fit_vb({}));

  const MddEstimate ris = ris_estimate(ev, *q);
  CHECK(ris.log_mdd == doctest::Approx(exact).epsilon(1e-12));
  for (double t : ris.log_terms) CHECK(t == doctest::Approx(ris.log_terms.front()).epsilon(1e-10));

  Rng rng(3);
  const MddEstimate is = is_estimate(toy, *q, 500, rng);
  CHECK(is.log_mdd == doctest::Approx(ris.log_mdd).epsilon(1e-12));

  const MddEstimate bs = bs_estimate(toy, ev, *q, {}, rng);
  CHECK(bs.iterations == 1);
  CHECK(bs.log_mdd == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("bridge recursion fixed point and iteration count") {
  const GaussianMeanToy::Spec spec = [] {
    auto s = toy_spec(12);
    s.vb_var_scale = 0.6;  // deliberately too narrow
    return s;
  }();
  const GaussianMeanToy toy(spec);
  const PosteriorDrawSet d = toy.sample_posterior({3000, 100, 1}, 8);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const WeightingPtr q = make_vb_weighting(toy.fit_vb({}));
  Rng rng(4);
  const MddEstimate bs = bs_estimate(toy, ev, *q, {}, rng);
  CHECK(bs.iterations <= 20);
  CHECK(bs.trace.size() == static_cast<std::size_t>(bs.iterations) + 1);
  CHECK(bs.log_mdd == doctest::Approx(*toy.exact_log_mdd()).epsilon(0.01));

  // Rebuild the ratios the estimator used and take one more step.
  Rng replay(4);
  std::vector<double> l_post, l_g;
  for (Eigen::Index s = 0; s < d.size(); ++s) l_post.push_back(ev.log_kernel[s] - q->log_density(d.draw(s)));
  for (Eigen::Index o = 0; o < d.size(); ++o) {
    const Vec th = q->sample(replay);
    l_g.push_back(toy.log_kernel(th) - q->log_density(th));
  }
  CHECK(std::abs(bridge_step(l_post, l_g, bs.log_mdd) - bs.log_mdd) < 1e-10);
}

TEST_CASE("ris with the prior is the harmonic mean") {
  const GaussianMeanToy toy(toy_spec(13, 5));
  const PosteriorDrawSet d = draws_of({0.1, 0.2, 0.3});
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const MddEstimate est = ris_estimate(ev, *make_prior_weighting(toy));
  const double l1 = toy.log_likelihood(Vec::Constant(1, 0.1)), l2 = toy.log_likelihood(Vec::Constant(1, 0.2)),
               l3 = toy.log_likelihood(Vec::Constant(1, 0.3));
  const double hand = -std::log((std::exp(-l1) + std::exp(-l2) + std::exp(-l3)) / 3.0);
  CHECK(est.log_mdd == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("ris fails when the weighting misses every draw") {
  const GaussianMeanToy toy(toy_spec(14));
  const PosteriorDrawSet d = draws_of({100.0, 101.0, 102.0});
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const WeightingPtr g = make_geweke_weighting(toy.layout(), draws_of({-1.0, 1.0, 0.0, 0.5}), 0.05);
  CHECK_THROWS_AS(ris_estimate(ev, *g), EstimationError);
}

TEST_CASE("geweke weighting at the center, the cut and in total") {
  ParamLayout l;
  l.add_real("x", 1);
  const WeightingPtr g = make_geweke_weighting(l, draws_of({-1.0, 1.0}), 0.05);
  CHECK(g->tag() == "geweke");
  CHECK(g->log_density(Vec::Constant(1, 0.0)) == doctest::Approx(-0.5 * kLnTwoPi - std::log(0.95)).epsilon(1e-12));
  CHECK(g->log_density(Vec::Constant(1, std::sqrt(3.85))) == -kInf);
  CHECK(std::isfinite(g->log_density(Vec::Constant(1, std::sqrt(3.84)))));
  const double c = std::sqrt(chi_square_quantile(1, 0.95));
  CHECK(integrate_scalar_weighting(*g, -c, c, {0.0}) == doctest::Approx(1.0).epsilon(1e-8));

  const WeightingPtr nrm = make_geweke_weighting(l, draws_of({-1.0, 1.0}), 0.0);
  CHECK(nrm->tag() == "normal");
  CHECK(nrm->log_density(Vec::Constant(1, 0.0)) == doctest::Approx(-0.5 * kLnTwoPi).epsilon(1e-12));
}

TEST_CASE("geweke weighting on a positive parameter keeps unit mass") {
  ParamLayout l;
  l.add_positive("h", 1);
  const WeightingPtr g = make_geweke_weighting(l, draws_of({0.5, 1.0, 2.0, 1.5, 0.8}), 0.05);
  CHECK(g->log_density(Vec::Constant(1, -1.0)) == -kInf);
  // Support of the truncated body in h: exp(mean +- c sd) of the logged draws.
  double m = 0.0, v = 0.0;
  for (double x : {0.5, 1.0, 2.0, 1.5, 0.8}) m += std::log(x) / 5.0;
  for (double x : {0.5, 1.0, 2.0, 1.5, 0.8}) v += (std::log(x) - m) * (std::log(x) - m) / 5.0;
  const double c = std::sqrt(chi_square_quantile(1, 0.95) * v);
  CHECK(integrate_scalar_weighting(*g, std::exp(m - c), std::exp(m + c), {std::exp(m)}) ==
        doctest::Approx(1.0).epsilon(1e-8));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) CHECK(std::isfinite(g->log_density(g->sample(rng))));
}

TEST_CASE("pmd on independent blocks is the exact posterior") {
  const TwoBlockToy toy(toy_spec(21), toy_spec(22, 12));
  const PosteriorDrawSet d = toy.sample_posterior({1500, 50, 1}, 9);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const WeightingPtr pmd = make_pmd_weighting(toy, d, 1000);
  const WeightingPtr exact_q = make_vb_weighting(toy.fit_vb({}));
  for (Eigen::Index s = 0; s < 20; ++s)
    CHECK(pmd->log_density(d.draw(s)) == doctest::Approx(exact_q->log_density(d.draw(s))).epsilon(1e-10));
  const MddEstimate est = ris_estimate(ev, *pmd);
  CHECK(est.log_mdd == doctest::Approx(*toy.exact_log_mdd()).epsilon(1e-10));
}

TEST_CASE("pmd packed and unpacked evaluation agree") {
  const auto model = two_group(3);
  const PosteriorDrawSet d = model.sample_posterior({400, 50, 1}, 2);
  const WeightingPtr pmd = make_pmd_weighting(model, d, 100);
  for (Eigen::Index s = 0; s < 10; ++s) {
    const Vec th = d.draw(s);
    double direct = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
      std::vector<double> t;
      for (int j = 0; j < 100; ++j) {
        const auto idx = static_cast<Eigen::Index>((j + 0.5) * 400.0 / 100.0);
        t.push_back(model.conditional(m, d.state(idx))->log_pdf(model.layout().slice(th, m)));
      }
      direct += log_sum_exp(t) - std::log(100.0);
    }
    CHECK(pmd->log_density(th) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("chib on a single block equals the kernel over the rao-blackwell ordinate") {
  const GaussianMeanToy toy(toy_spec(31));
  const PosteriorDrawSet d = toy.sample_posterior({500, 50, 1}, 10);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  const Vec star = chib_default_point(toy, d);
  const MddEstimate est = chib_estimate(toy, ev, {}, 1);
  const WeightingPtr pmd = make_pmd_weighting(toy, d, 500);
  CHECK(est.log_mdd == doctest::Approx(toy.log_kernel(star) - pmd->log_density(star)).epsilon(1e-12));
  CHECK(est.log_mdd == doctest::Approx(*toy.exact_log_mdd()).epsilon(1e-10));
}

TEST_CASE("chib default point uses the geometric mean on positive blocks") {
  const auto model = two_group(4);
  PosteriorDrawSet d;
  d.theta.resize(3, 2);
  d.theta << 1.0, 3.0, -1.0, 1.0, 1.0, 4.0;
  const Vec p = chib_default_point(model, d);
  CHECK(p(0) == doctest::Approx(2.0));
  CHECK(p(1) == doctest::Approx(0.0));
  CHECK(p(2) == doctest::Approx(2.0));
}

TEST_CASE("swz weighting in one dimension") {
  const GaussianMeanToy toy(toy_spec(41));
  const PosteriorDrawSet d = toy.sample_posterior({5000, 100, 1}, 12);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  Rng rng(6);
  const WeightingPtr w = make_swz_weighting(toy, ev, {}, rng);

  int pass = 0;
  std::vector<double> lk = ev.log_kernel;
  std::sort(lk.begin(), lk.end());
  const double level = lk[static_cast<std::size_t>(0.1 * (lk.size() - 1))];
  for (double v : ev.log_kernel) pass += v > level;
  CHECK(pass / 5000.0 == doctest::Approx(0.9).epsilon(0.02 / 0.9));

  // The mass estimate is Monte Carlo, so the total is 1 up to its binomial error.
  const double m = toy.posterior_mean(), sd = std::sqrt(toy.posterior_var());
  const double total = integrate_scalar_weighting(*w, m - 8 * sd, m + 8 * sd, peak_breakpoints(m, sd), 1e-8);
  CHECK(std::abs(total - 1.0) < 3.0 * std::sqrt(0.1 / (0.9 * 20000.0)) + 1e-6);

  const MddEstimate est = ris_estimate(ev, *w);
  CHECK(est.log_mdd == doctest::Approx(*toy.exact_log_mdd()).epsilon(0.01));
}

TEST_CASE("swz mode search finds the posterior mean") {
  const GaussianMeanToy toy(toy_spec(42));
  const PosteriorDrawSet d = toy.sample_posterior({2000, 100, 1}, 13);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  Rng rng(7);
  const WeightingPtr w = make_swz_weighting(toy, ev, {0.1, 2000}, rng);
  // The elliptical body is symmetric about the mode, so the density at mean +- x matches
  // whenever both points sit on the same side of the kernel cut.
  const double m = toy.posterior_mean(), sd = std::sqrt(toy.posterior_var());
  CHECK(w->log_density(Vec::Constant(1, m + 0.5 * sd)) ==
        doctest::Approx(w->log_density(Vec::Constant(1, m - 0.5 * sd))).epsilon(1e-5));
}

TEST_CASE("estimators agree with quadrature on a three-block model") {
  const int reps = 10;
  const auto model = two_group(5);
  const double exact = model.quadrature_log_mdd();
  std::vector<std::vector<double>> vals(7);
  for (int r = 0; r < reps; ++r) {
    const PosteriorDrawSet d = model.sample_posterior({3000, 300, 1}, 100 + r);
    const ChainEvaluation ev = evaluate_chain(model, d);
    Rng rng = Rng::stream(7, {static_cast<std::uint64_t>(r)});
    const WeightingPtr pmd = make_pmd_weighting(model, d, 500);
    // Fitting and evaluating on one chain adds an O(1/S) bias of a few thousandths
    // here, so the oracle comparison fits the normal on a separate pilot chain.
    const PosteriorDrawSet pilot = model.sample_posterior({3000, 300, 1}, 900 + r);
    const WeightingPtr gew = make_geweke_weighting(model.layout(), pilot, 0.05);
    vals[0].push_back(ris_estimate(ev, *pmd).log_mdd);
    vals[1].push_back(bs_estimate(model, ev, *pmd, {}, rng).log_mdd);
    vals[2].push_back(ris_estimate(ev, *gew).log_mdd);
    vals[3].push_back(bs_estimate(model, ev, *gew, {}, rng).log_mdd);
    vals[4].push_back(chm_estimate(model, ev, 20000, rng).log_mdd);
    vals[5].push_back(chib_estimate(model, ev, {1000, 100}, 50 + r).log_mdd);
    vals[6].push_back(ris_estimate(ev, *make_swz_weighting(model, ev, {0.1, 5000}, rng)).log_mdd);
  }
  const std::string names[] = {"ris-pmd", "bs-pmd", "ris-geweke", "bs-geweke", "chm", "chib", "ris-swz"};
  for (std::size_t k = 0; k < vals.size(); ++k) {
    double mean = 0.0;
    for (double v : vals[k]) mean += v / reps;
    const double se = nse(vals[k]) / std::sqrt(double(reps));
    INFO(names[k], " mean ", mean, " se ", se, " exact ", exact);
    CHECK(std::abs(mean - exact) < 3.0 * se + 1e-3);
  }
}

TEST_CASE("importance sampling from the prior matches quadrature") {
  const auto model = two_group(6);
  const double exact = model.quadrature_log_mdd();
  std::vector<double> vals;
  for (int r = 0; r < 10; ++r) {
    Rng rng = Rng::stream(8, {static_cast<std::uint64_t>(r)});
    vals.push_back(is_estimate(model, *make_prior_weighting(model), 200000, rng).log_mdd);
  }
  double mean = 0.0;
  for (double v : vals) mean += v / 10.0;
  INFO("mean ", mean, " exact ", exact);
  CHECK(std::abs(mean - exact) < 3.0 * nse(vals) / std::sqrt(10.0) + 1e-3);
}

TEST_CASE("estimator argument checks") {
  const GaussianMeanToy toy(toy_spec(51));
  const PosteriorDrawSet d = toy.sample_posterior({200, 10, 1}, 1);
  const ChainEvaluation ev = evaluate_chain(toy, d);
  Rng rng(1);
  CHECK_THROWS_AS(chm_estimate(toy, ev, 999, rng), ArgumentError);
  CHECK_THROWS_AS(is_estimate(toy, *make_prior_weighting(toy), 0, rng), ArgumentError);
  CHECK_THROWS_AS(make_geweke_weighting(toy.layout(), d, 1.0), ArgumentError);
  CHECK_THROWS_AS(make_vb_weighting(VBResult{}), ArgumentError);
}
