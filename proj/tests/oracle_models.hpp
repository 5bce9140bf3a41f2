#pragma once

// Small models with independently computable evidence, used as test oracles.

#include <cmath>
#include <vector>

#include "vbmdd/model/kernel.hpp"
#include "vbmdd/stats/quadrature.hpp"
#include "vbmdd/stats/special.hpp"

namespace oracle {

using vbmdd::ChainState;
using vbmdd::Mat;
using vbmdd::Vec;

// Two normal groups with their own means and a shared precision h:
//   y_gi ~ N(mu_g, 1/h), mu_g ~ N(m0, v0), h ~ Gamma(a0, b0).
// Blocks mu1, mu2, h, so a Gibbs sweep has three dependent steps.
class TwoGroupNormal final : public vbmdd::ModelKernel {
 public:
  TwoGroupNormal(std::vector<double> y1, std::vector<double> y2) : y_{std::move(y1), std::move(y2)} {
    layout_.add_real("mu1", 1).add_real("mu2", 1).add_positive("h", 1);
  }
  double m0 = 0.0, v0 = 4.0, a0 = 2.0, b0 = 2.0;

  std::string name() const override { return "two-group-normal"; }
  const vbmdd::ParamLayout& layout() const override { return layout_; }
  double log_prior(const Vec& t) const override {
    double lp = 0.0;
    for (int g = 0; g < 2; ++g) lp += vbmdd::normal_log_pdf((t(g) - m0) / std::sqrt(v0)) - 0.5 * std::log(v0);
    return lp + vbmdd::GammaDist(a0, b0).log_pdf(t(2));
  }
  double log_likelihood(const Vec& t) const override {
    double ll = 0.0;
    for (int g = 0; g < 2; ++g)
      for (double v : y_[g]) ll += 0.5 * std::log(t(2)) - 0.5 * vbmdd::kLnTwoPi - 0.5 * t(2) * (v - t(g)) * (v - t(g));
    return ll;
  }
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(vbmdd::Rng& rng) const override {
    Vec t(3);
    t << m0 + std::sqrt(v0) * rng.normal(), m0 + std::sqrt(v0) * rng.normal(), vbmdd::GammaDist(a0, b0).sample(rng);
    return t;
  }
  bool has_conditionals() const override { return true; }
  vbmdd::BlockDensityPtr conditional(std::size_t b, const ChainState& s) const override {
    const double h = s.theta(2);
    if (b < 2) {
      double sum = 0.0;
      for (double v : y_[b]) sum += v;
      const double prec = 1.0 / v0 + static_cast<double>(y_[b].size()) * h;
      return std::make_shared<vbmdd::NormalBlock>(Vec::Constant(1, (m0 / v0 + h * sum) / prec),
                                                  Mat::Constant(1, 1, 1.0 / prec));
    }
    double ss = 0.0, n = 0.0;
    for (int g = 0; g < 2; ++g)
      for (double v : y_[g]) {
        ss += (v - s.theta(g)) * (v - s.theta(g));
        n += 1.0;
      }
    return std::make_shared<vbmdd::GammaBlock>(a0 + 0.5 * n, b0 + 0.5 * ss);
  }
  ChainState initial_state() const override {
    Vec t(3);
    t << mean(0), mean(1), 1.0;
    return {t, Vec()};
  }

  // ln p(y | h) with both means integrated out.
  double log_lik_h(double h) const {
    double r = 0.0;
    for (int g = 0; g < 2; ++g) {
      const double n = static_cast<double>(y_[g].size()), ybar = mean(g);
      double ss = 0.0;
      for (double v : y_[g]) ss += (v - ybar) * (v - ybar);
      const double k = 1.0 + n * h * v0;
      r += -0.5 * n * vbmdd::kLnTwoPi + 0.5 * n * std::log(h) - 0.5 * std::log(k) -
           0.5 * h * (ss + n * (ybar - m0) * (ybar - m0) / k);
    }
    return r;
  }
  double quadrature_log_mdd() const {
    vbmdd::QuadratureOptions o;
    o.rel_tol = 1e-12;
    o.scale = 1.0;
    return vbmdd::quadrature_1d(
        [&](double h) { return h > 0.0 ? log_lik_h(h) + vbmdd::GammaDist(a0, b0).log_pdf(h) : -INFINITY; }, 0.0,
        INFINITY, o);
  }

 private:
  double mean(int g) const {
    double s = 0.0;
    for (double v : y_[g]) s += v;
    return s / static_cast<double>(y_[g].size());
  }
  std::vector<double> y_[2];
  vbmdd::ParamLayout layout_;
};

}  // namespace oracle
