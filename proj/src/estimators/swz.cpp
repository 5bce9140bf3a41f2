#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <functional>
#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
}

Vec numeric_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double fx) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fp = f(xp), fm = f(xm);
    if (std::isfinite(fp) && std::isfinite(fm))
      g(i) = (fp - fm) / (2.0 * h);
    else if (std::isfinite(fp))
      g(i) = (fp - fx) / h;
    else if (std::isfinite(fm))
      g(i) = (fx - fm) / h;
    else
      g(i) = 0.0;
  }
  return g;
}

// BFGS ascent with backtracking; returns the maximizer.
Vec maximize(const std::function<double(const Vec&)>& f, Vec x) {
  const Eigen::Index n = x.size();
  double fx = f(x);
  if (!std::isfinite(fx)) throw EstimationError("swz: mode search started at a point with zero kernel");
  Vec g = numeric_gradient(f, x, fx);
  Mat hinv = Mat::Identity(n, n);
  for (int it = 0; it < 500; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-7) return x;
    Vec dir = hinv * g;
    if (dir.dot(g) <= 0.0) {
      hinv.setIdentity();
      dir = g;
    }
    double step = 1.0, fn = -kInf;
    Vec xn;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      xn = x + step * dir;
      fn = f(xn);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * step * dir.dot(g)) break;
    }
    if (!(std::isfinite(fn) && fn >= fx)) return x;  // no ascent left at this resolution
    const Vec gn = numeric_gradient(f, xn, fn);
    const Vec s = xn - x, y = g - gn;  // y: change in the gradient of -f
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Mat I = Mat::Identity(n, n);
      hinv = (I - rho * s * y.transpose()) * hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const bool small = std::abs(fn - fx) < 1e-12 * (1.0 + std::abs(fx));
    x = xn;
    fx = fn;
    g = gn;
    if (small) return x;
  }
  return x;
}

class SwzWeighting final : public WeightingDensity {
 public:
  SwzWeighting(const ModelKernel& model, Vec mode, const Mat& scale, double a, double b, double nu, double level)
      : model_(model), mode_(std::move(mode)), chol_(scale, "SWZ scaling matrix"), a_(a), b_(b), nu_(nu),
        level_(level) {
    const double n = static_cast<double>(mode_.size());
    log_radial_norm_ = std::log(nu) - std::log(std::pow(b, nu) - std::pow(a, nu));
    log_const_ = boost::math::lgamma(0.5 * n) - kLn2 - 0.5 * n * kLnPi - 0.5 * chol_.log_det();
  }

  std::string tag() const override { return "swz"; }

  /// Density of the elliptical body alone on psi, before the kernel cut.
  double log_body(const Vec& psi) const {
    const double r = std::sqrt(chol_.quad_form_inv(psi - mode_));
    if (r < a_ || r > b_) return -kInf;
    const double n = static_cast<double>(mode_.size());
    return log_const_ + log_radial_norm_ + (nu_ - 1.0) * std::log(r) - (n - 1.0) * std::log(r);
  }

  double log_density(const Vec& theta) const override {
    const ParamLayout& layout = model_.layout();
    if (!layout.in_support(theta)) return -kInf;
    const Vec psi = layout.to_unconstrained(theta);
    const double body = log_body(psi);
    if (body == -kInf || !(model_.log_kernel(theta) > level_)) return -kInf;
    return body - log_mass_ - layout.log_jacobian(psi);
  }

  bool can_sample() const override { return true; }
  Vec sample(Rng& rng) const override {
    for (int k = 0; k < 1000000; ++k) {
      const Vec th = model_.layout().to_constrained(sample_body(rng));
      if (model_.log_kernel(th) > level_) return th;
    }
    throw EstimationError("swz: sampler rejected a million proposals");
  }

  Vec sample_body(Rng& rng) const {
    Vec z(mode_.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    z /= z.norm();
    const double an = std::pow(a_, nu_), bn = std::pow(b_, nu_);
    const double r = std::pow(an + rng.uniform() * (bn - an), 1.0 / nu_);
    return mode_ + r * (chol_.lower() * z);
  }

  void set_log_mass(double v) { log_mass_ = v; }
  double log_mass() const { return log_mass_; }

 private:
  const ModelKernel& model_;
  Vec mode_;
  SpdFactor chol_;
  double a_, b_, nu_, level_;
  double log_radial_norm_ = 0.0, log_const_ = 0.0, log_mass_ = 0.0;
};

// Mean of the radial density nu r^(nu-1)/(b^nu - a^nu) on [a, b].
double radial_mean(double nu, double a, double b) {
  const double q = a / b;
  return nu / (nu + 1.0) * b * (-std::expm1((nu + 1.0) * std::log(q))) / (-std::expm1(nu * std::log(q)));
}
}  // namespace

WeightingPtr make_swz_weighting(const ModelKernel& model, const ChainEvaluation& chain, const SwzOptions& opts,
                                Rng& rng) {
  const PosteriorDrawSet& d = *chain.draws;
  const ParamLayout& layout = model.layout();
  const Eigen::Index n = layout.size(), S = d.size();
  if (S <= n + 1) throw ArgumentError("swz: need more draws than parameters");
  if (!(opts.kernel_quantile > 0.0 && opts.kernel_quantile < 1.0))
    throw ArgumentError("swz: kernel quantile must lie in (0, 1)");

  Mat psi(n, S);
  Eigen::Index best = -1;
  double best_val = -kInf;
  for (Eigen::Index s = 0; s < S; ++s) {
    psi.col(s) = layout.to_unconstrained(d.draw(s));
    const double v = chain.log_kernel[static_cast<std::size_t>(s)] + layout.log_jacobian(psi.col(s));
    if (v > best_val) {
      best_val = v;
      best = s;
    }
  }
  if (best < 0) throw EstimationError("swz: no chain draw has a positive kernel");
  auto objective = [&](const Vec& x) {
    const Vec th = layout.to_constrained(x);
    const double lk = model.log_kernel(th);
    return std::isfinite(lk) ? lk + layout.log_jacobian(x) : -kInf;
  };
  const Vec mode = maximize(objective, psi.col(best));

  const Mat c = psi.colwise() - mode;
  const Mat scale = symmetrize(c * c.transpose() / static_cast<double>(S));
  const SpdFactor f(scale, "SWZ scaling matrix");
  std::vector<double> radii(static_cast<std::size_t>(S));
  for (Eigen::Index s = 0; s < S; ++s) radii[static_cast<std::size_t>(s)] = std::sqrt(f.quad_form_inv(c.col(s)));
  const double a = percentile(radii, 0.01), b = percentile(radii, 0.99);
  if (!(a > 0.0 && a < b)) throw EstimationError("swz: degenerate radial range");
  double sum = 0.0;
  std::size_t cnt = 0;
  for (double r : radii)
    if (r >= a && r <= b) {
      sum += r;
      ++cnt;
    }
  const double target = sum / static_cast<double>(cnt);
  double nu;
  const double lo = 1e-6, hi = 1e4;
  if (target <= radial_mean(lo, a, b)) {
    nu = lo;
  } else if (target >= radial_mean(hi, a, b)) {
    nu = hi;
  } else {
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve([&](double v) { return radial_mean(v, a, b) - target; },
                                                        lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    nu = 0.5 * (root.first + root.second);
  }

  const double level = percentile(chain.log_kernel, opts.kernel_quantile);
  auto w = std::make_shared<SwzWeighting>(model, mode, scale, a, b, nu, level);
  Eigen::Index pass = 0;
  for (Eigen::Index r = 0; r < opts.mc_draws; ++r) {
    const Vec th = layout.to_constrained(w->sample_body(rng));
    if (model.log_kernel(th) > level) ++pass;
  }
  if (pass == 0) throw EstimationError("swz: no elliptical draw passes the kernel threshold");
  w->set_log_mass(std::log(static_cast<double>(pass) / static_cast<double>(opts.mc_draws)));
  return w;
}

}  // namespace vbmdd
