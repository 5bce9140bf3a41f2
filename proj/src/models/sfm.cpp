#include "vbmdd/models/sfm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfm_common.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/stats/quadrature.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

namespace sfm_detail {

PanelStats panel_stats(const SfmData& d) {
  PanelStats s;
  s.xx = d.x.transpose() * d.x;
  s.xy = d.x.transpose() * d.y;
  s.xf = Mat::Zero(d.N, d.k());
  s.ysum = Vec::Zero(d.N);
  for (Eigen::Index i = 0; i < d.N; ++i) {
    s.xf.row(i) = d.x.middleRows(i * d.T, d.T).colwise().sum();
    s.ysum(i) = d.y.segment(i * d.T, d.T).sum();
  }
  return s;
}

Vec ols_beta(const SfmData& d) { return d.x.completeOrthogonalDecomposition().solve(d.y); }

Vec firm_residual_sums(const SfmData& d, const Vec& beta) {
  const Vec e = d.y - d.x * beta;
  Vec out(d.N);
  for (Eigen::Index i = 0; i < d.N; ++i) out(i) = e.segment(i * d.T, d.T).sum();
  return out;
}

double residual_ss(const SfmData& d, const Vec& beta, const Vec& u) {
  const Vec e = d.y - d.x * beta;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < d.N; ++i)
    ss += (e.segment(i * d.T, d.T).array() - d.sign * u(i)).square().sum();
  return ss;
}

double expected_sse(const SfmData& d, const PanelStats& s, const Vec& b, const Mat& V, const Vec& u1, const Vec& u2) {
  const double spread = (s.xx.array() * V.array()).sum();
  const double var_u = (u2 - u1.cwiseProduct(u1)).sum();
  return residual_ss(d, b, u1) + spread + static_cast<double>(d.T) * var_u;
}

Vec update_beta(const SfmData& d, const PanelStats& s, const Vec& prior_mean, const Mat& prior_prec, double h,
                const Vec& u1, Mat& cov) {
  const Mat prec = symmetrize(prior_prec + h * s.xx);
  const SpdFactor f(prec, "SFM q(beta) precision");
  cov = symmetrize(f.inverse());
  const Vec rhs = prior_prec * prior_mean + h * (s.xy - d.sign * (s.xf.transpose() * u1));
  return f.solve(rhs);
}

BlockDensityPtr beta_conditional(const SfmData& d, const Mat& xx, const Mat& prior_prec, const Vec& prior_mean,
                                 double h, const Vec& u) {
  const Mat prec = symmetrize(prior_prec + h * xx);
  Vec z = d.y;
  for (Eigen::Index i = 0; i < d.N; ++i) z.segment(i * d.T, d.T).array() -= d.sign * u(i);
  const Vec mean = SpdFactor(prec, "SFM beta conditional precision").solve(Vec(prior_prec * prior_mean + h * (d.x.transpose() * z)));
  return NormalBlock::from_precision(mean, prec);
}

void validate_normal_prior(const Vec& beta, const Mat& V, Eigen::Index k) {
  if (beta.size() != k || V.rows() != k || V.cols() != k)
    throw ModelConfigError("SFM prior: beta prior must have " + std::to_string(k) + " entries");
  require_symmetric(V, "SFM beta prior covariance");
  if (Eigen::LLT<Mat>(V).info() != Eigen::Success) throw ModelConfigError("SFM beta prior covariance is not positive definite");
}

}  // namespace sfm_detail

using namespace sfm_detail;

void SfmData::validate() const {
  if (N < 1 || T < 1) throw ArgumentError("SFM data: need N >= 1 firms and T >= 1 periods");
  if (y.size() != N * T || x.rows() != N * T) throw ArgumentError("SFM data: y and x must have N*T rows");
  if (x.cols() < 1) throw ArgumentError("SFM data: x needs at least one column");
  if (sign != -1 && sign != 1) throw ArgumentError("SFM data: sign must be -1 (production) or +1 (cost)");
  if (!y.allFinite() || !x.allFinite()) throw ArgumentError("SFM data: non-finite values");
}

SfmData sfm_synthetic(std::uint64_t seed, Eigen::Index N, Eigen::Index T, Eigen::Index k, Inefficiency family,
                      const SfmTrueParams& truth, int sign) {
  if (N < 1 || T < 1 || k < 1) throw ArgumentError("sfm_synthetic: N, T, k must be positive");
  if (truth.beta.size() != k) throw ArgumentError("sfm_synthetic: beta must have k entries");
  if (!(truth.sigma > 0.0) || !(truth.lambda > 0.0) || !(truth.theta > 0.0))
    throw ArgumentError("sfm_synthetic: sigma, lambda and theta must be positive");
  Rng rng(seed);
  SfmData d;
  d.N = N;
  d.T = T;
  d.sign = sign;
  d.x.resize(N * T, k);
  d.y.resize(N * T);
  for (Eigen::Index r = 0; r < N * T; ++r) {
    d.x(r, 0) = 1.0;
    for (Eigen::Index j = 1; j < k; ++j) d.x(r, j) = rng.normal();
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    const double u = family == Inefficiency::Exponential ? rng.exponential() / truth.lambda
                                                         : sample_standard_gamma(truth.theta, rng) / truth.lambda;
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index r = i * T + t;
      d.y(r) = d.x.row(r).dot(truth.beta) + sign * u + truth.sigma * rng.normal();
    }
  }
  d.validate();
  return d;
}

SfmExpPrior SfmExpPrior::standard(Eigen::Index k, double v) {
  SfmExpPrior p;
  p.beta = Vec::Zero(k);
  p.V = v * Mat::Identity(k, k);
  p.b_lambda = -std::log(0.875);
  return p;
}

void SfmExpPrior::validate(Eigen::Index k) const {
  validate_normal_prior(beta, V, k);
  if (!(a_sigma > 0.0 && b_sigma > 0.0 && a_lambda > 0.0 && b_lambda > 0.0))
    throw ModelConfigError("SFM prior: gamma parameters must be positive");
}

SfmGammaPrior SfmGammaPrior::standard(Eigen::Index k, double v) {
  SfmGammaPrior p;
  p.beta = Vec::Zero(k);
  p.V = v * Mat::Identity(k, k);
  p.b_lambda = -std::log(0.875);
  return p;
}

void SfmGammaPrior::validate(Eigen::Index k) const {
  validate_normal_prior(beta, V, k);
  if (!(a_sigma > 0.0 && b_sigma > 0.0 && b_lambda > 0.0 && a_theta > 0.0 && b_theta > 0.0))
    throw ModelConfigError("SFM prior: gamma parameters must be positive");
}

double sfm_exp_integrated_loglik(const SfmData& d, const Vec& beta, double h, double lambda) {
  if (!(h > 0.0) || !(lambda > 0.0)) return -kInf;
  const Vec e = d.y - d.x * beta;
  const double T = static_cast<double>(d.T);
  const double ht = h * T;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.N; ++i) {
    const auto ei = e.segment(i * d.T, d.T);
    // Completing the square in u leaves x^2/2 + ln Phi(x) with x = m sqrt(hT); for x < 0
    // it is written as -ln(phi(x)/Phi(x)) - ln(2 pi)/2 so the two large terms never meet.
    const double m = d.sign * ei.mean() - lambda / ht;
    const double x = m * std::sqrt(ht);
    const double tail = x < 0.0 ? -std::log(inverse_mills(x)) - 0.5 * kLnTwoPi : 0.5 * x * x + log_normal_cdf(x);
    ll += -0.5 * T * (kLnTwoPi - std::log(h)) - 0.5 * h * ei.squaredNorm() + std::log(lambda) +
          0.5 * (kLnTwoPi - std::log(ht)) + tail;
  }
  return ll;
}

double sfm_gamma_integrated_loglik(const SfmData& d, const Vec& beta, double h, double lambda, double theta) {
  if (!(h > 0.0) || !(lambda > 0.0) || !(theta > 0.0)) return -kInf;
  const Vec e = d.y - d.x * beta;
  const double T = static_cast<double>(d.T);
  const double upsilon = std::sqrt(T * h);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.N; ++i) {
    const auto ei = e.segment(i * d.T, d.T);
    const double z = (lambda - d.sign * h * ei.sum()) / upsilon;
    ll += -0.5 * T * (kLnTwoPi - std::log(h)) - 0.5 * h * ei.squaredNorm() + theta * std::log(lambda) -
          std::lgamma(theta) - theta * std::log(upsilon) + log_pcf_integral(theta, z, 1e-11);
  }
  return ll;
}

PcfDensity::PcfDensity(double shape, double upsilon, double mu) : shape_(shape), upsilon_(upsilon), mu_(mu) {
  if (!(shape > 0.0) || !(upsilon > 0.0) || !std::isfinite(mu))
    throw ArgumentError("PcfDensity: need shape > 0, upsilon > 0 and finite mu");
  z_ = mu / upsilon;
  log_i_ = log_pcf_integral(shape, z_);
  log_norm_ = -shape * std::log(upsilon) + log_i_;
}

double PcfDensity::log_pdf(double u) const {
  if (!(u > 0.0)) return -kInf;
  return (shape_ - 1.0) * std::log(u) - 0.5 * upsilon_ * upsilon_ * u * u - mu_ * u - log_norm_;
}

double PcfDensity::moment(int m) const {
  if (m == 0) return 1.0;
  return std::exp(log_pcf_integral(shape_ + m, z_) - log_i_ - m * std::log(upsilon_));
}

double PcfDensity::mean_log() const {
  // With t = upsilon u and s = ln t the density of s is exp(shape s - e^{2s}/2 - z e^s) / I.
  const double t0 = 0.5 * (-z_ + std::sqrt(z_ * z_ + 4.0 * shape_));
  const double s0 = std::log(t0);
  const double sd = 1.0 / std::sqrt(t0 * t0 + shape_);
  QuadratureOptions opts;
  opts.rel_tol = 1e-11;
  opts.max_levels = 30;
  opts.breakpoints = peak_breakpoints(s0, sd);
  const double lower = s0 - 50.0 * sd - 40.0 / shape_, upper = s0 + 50.0 * sd;
  const double log_i = log_i_, z = z_, a = shape_;
  auto f = [=](double s) { return s * std::exp(a * s - 0.5 * std::exp(2.0 * s) - z * std::exp(s) - log_i); };
  return integrate_signed(f, lower, upper, {0.0}, opts) - std::log(upsilon_);
}

double PcfDensity::entropy() const {
  return -((shape_ - 1.0) * mean_log() - 0.5 * upsilon_ * upsilon_ * moment(2) - mu_ * moment(1) - log_norm_);
}

namespace {

struct ExpState {
  Vec u1, u2;
};

ExpState exp_u_moments(const SfmExpVb& q) {
  ExpState s{Vec(q.u_loc.size()), Vec(q.u_loc.size())};
  for (Eigen::Index i = 0; i < q.u_loc.size(); ++i) {
    const TruncNormal tn(q.u_loc(i), q.u_scale);
    const double m = tn.mean();
    s.u1(i) = m;
    s.u2(i) = tn.variance() + m * m;
  }
  return s;
}

double gamma_terms(double a0, double b0, double a, double b) {
  return std::lgamma(a) - a * std::log(b) + a0 * std::log(b0) - std::lgamma(a0);
}

}  // namespace

SfmExpVb sfm_exp_vb(const SfmExpPrior& prior, const SfmData& data, double tol, int max_iter) {
  data.validate();
  prior.validate(data.k());
  if (!(tol > 0.0) || max_iter < 1) throw ArgumentError("sfm_exp_vb: need tol > 0 and max_iter >= 1");
  const PanelStats st = panel_stats(data);
  const Mat prior_prec = inverse_spd(prior.V, "SFM beta prior covariance");
  const double N = static_cast<double>(data.N), T = static_cast<double>(data.T);

  SfmExpVb q;
  q.beta = ols_beta(data);
  const double s2 = std::max((data.y - data.x * q.beta).squaredNorm() / (N * T), 1e-8);
  q.a_sigma = prior.a_sigma + 0.5 * N * T;
  q.b_sigma = q.a_sigma * s2;
  q.a_lambda = prior.a_lambda + N;
  q.b_lambda = q.a_lambda * std::sqrt(s2);
  q.V = inverse_spd(symmetrize(prior_prec + (q.a_sigma / q.b_sigma) * st.xx), "SFM q(beta) precision");

  double last = -kInf;
  for (int it = 1; it <= max_iter; ++it) {
    const double h = q.a_sigma / q.b_sigma, lambda = q.a_lambda / q.b_lambda;
    const Vec ef = firm_residual_sums(data, q.beta);
    q.u_loc = (data.sign * ef.array() / T - lambda / (h * T)).matrix();
    q.u_scale = 1.0 / std::sqrt(h * T);
    const ExpState u = exp_u_moments(q);
    q.beta = update_beta(data, st, prior.beta, prior_prec, h, u.u1, q.V);
    q.b_sigma = prior.b_sigma + 0.5 * expected_sse(data, st, q.beta, q.V, u.u1, u.u2);
    q.b_lambda = prior.b_lambda + u.u1.sum();
    const double elbo = sfm_exp_vblb(prior, data, q);
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

double sfm_exp_vblb(const SfmExpPrior& prior, const SfmData& data, const SfmExpVb& q) {
  const double N = static_cast<double>(data.N), T = static_cast<double>(data.T), k = static_cast<double>(data.k());
  double tn = 0.0;
  for (Eigen::Index i = 0; i < data.N; ++i) {
    const double r = q.u_loc(i) / q.u_scale;
    tn += log_normal_cdf(r) - 0.5 * r * inverse_mills(r);
  }
  const SpdFactor pf(prior.V, "SFM beta prior covariance");
  const Vec db = q.beta - prior.beta;
  return 0.5 * ((N - N * T) * kLnTwoPi + N + k) +
         0.5 * (log_det_spd(q.V, "SFM q(beta) covariance") - pf.log_det()) - 0.5 * pf.quad_form_inv(db) -
         0.5 * (pf.inverse().array() * q.V.array()).sum() +
         gamma_terms(prior.a_sigma, prior.b_sigma, q.a_sigma, q.b_sigma) +
         gamma_terms(prior.a_lambda, prior.b_lambda, q.a_lambda, q.b_lambda) + N * std::log(q.u_scale) + tn;
}

double sfm_exp_elbo_terms(const SfmExpPrior& prior, const SfmData& data, const SfmExpVb& q) {
  const PanelStats st = panel_stats(data);
  const double N = static_cast<double>(data.N), T = static_cast<double>(data.T);
  const ExpState u = exp_u_moments(q);
  const GammaDist qh(q.a_sigma, q.b_sigma), ql(q.a_lambda, q.b_lambda);
  const GammaDist ph(prior.a_sigma, prior.b_sigma), pl(prior.a_lambda, prior.b_lambda);
  const double elh = qh.expected_log(), ell = ql.expected_log();
  auto gamma_prior = [](const GammaDist& p, double elx, double mx) {
    return p.shape() * std::log(p.rate()) - std::lgamma(p.shape()) + (p.shape() - 1.0) * elx - p.rate() * mx;
  };
  double v = -0.5 * N * T * kLnTwoPi + 0.5 * N * T * elh -
             0.5 * qh.mean() * expected_sse(data, st, q.beta, q.V, u.u1, u.u2);
  v += gamma_prior(ph, elh, qh.mean()) + gamma_prior(pl, ell, ql.mean());
  v += N * ell - ql.mean() * u.u1.sum();
  const MvNormal pb(prior.beta, prior.V);
  const Mat prior_prec = pb.factor().inverse();
  v += pb.log_pdf(q.beta) - 0.5 * (prior_prec.array() * q.V.array()).sum();
  v += MvNormal(q.beta, q.V).entropy() + qh.entropy() + ql.entropy();
  for (Eigen::Index i = 0; i < data.N; ++i) v += TruncNormal(q.u_loc(i), q.u_scale).entropy();
  return v;
}

SfmExpModel::SfmExpModel(SfmData data, SfmExpPrior prior, bool complete_data)
    : data_(std::move(data)), prior_(std::move(prior)), complete_data_(complete_data) {
  data_.validate();
  prior_.validate(data_.k());
  layout_.add_real("beta", data_.k()).add_positive("h", 1).add_positive("lambda", 1);
  if (complete_data_) layout_.add_positive("u", data_.N);
  beta_prior_ = MvNormal(prior_.beta, prior_.V);
  v_prior_inv_ = symmetrize(beta_prior_.factor().inverse());
  xx_ = data_.x.transpose() * data_.x;
}

double SfmExpModel::log_prior(const Vec& theta) const {
  const double h = theta(data_.k()), lambda = theta(data_.k() + 1);
  if (!(h > 0.0) || !(lambda > 0.0)) return -kInf;
  return beta_prior_.log_pdf(theta.head(data_.k())) + GammaDist(prior_.a_sigma, prior_.b_sigma).log_pdf(h) +
         GammaDist(prior_.a_lambda, prior_.b_lambda).log_pdf(lambda);
}

double SfmExpModel::log_likelihood(const Vec& theta) const {
  const Eigen::Index k = data_.k();
  const Vec beta = theta.head(k);
  const double h = theta(k), lambda = theta(k + 1);
  if (!complete_data_) return sfm_exp_integrated_loglik(data_, beta, h, lambda);
  const Vec u = theta.segment(k + 2, data_.N);
  if (!(h > 0.0) || !(lambda > 0.0) || (u.array() <= 0.0).any()) return -kInf;
  const double N = static_cast<double>(data_.N), T = static_cast<double>(data_.T);
  return -0.5 * N * T * (kLnTwoPi - std::log(h)) - 0.5 * h * residual_ss(data_, beta, u) + N * std::log(lambda) -
         lambda * u.sum();
}

Vec SfmExpModel::sample_prior(Rng& rng) const {
  Vec theta(layout_.size());
  theta.head(data_.k()) = beta_prior_.sample(rng);
  theta(data_.k()) = GammaDist(prior_.a_sigma, prior_.b_sigma).sample(rng);
  const double lambda = GammaDist(prior_.a_lambda, prior_.b_lambda).sample(rng);
  theta(data_.k() + 1) = lambda;
  if (complete_data_)
    for (Eigen::Index i = 0; i < data_.N; ++i) theta(data_.k() + 2 + i) = rng.exponential() / lambda;
  return theta;
}

BlockDensityPtr SfmExpModel::u_conditional(const Vec& theta) const {
  const Eigen::Index k = data_.k();
  const double h = theta(k), lambda = theta(k + 1), T = static_cast<double>(data_.T);
  const Vec ef = firm_residual_sums(data_, theta.head(k));
  const Vec loc = (data_.sign * ef.array() / T - lambda / (h * T)).matrix();
  return std::make_shared<TruncNormalBlock>(loc, Vec::Constant(data_.N, 1.0 / std::sqrt(h * T)));
}

BlockDensityPtr SfmExpModel::conditional(std::size_t block, const ChainState& state) const {
  const Eigen::Index k = data_.k();
  const Vec& th = state.theta;
  const Vec u = complete_data_ ? Vec(th.segment(k + 2, data_.N)) : state.latent;
  const double N = static_cast<double>(data_.N), T = static_cast<double>(data_.T);
  switch (block) {
    case 0:
      return beta_conditional(data_, xx_, v_prior_inv_, prior_.beta, th(k), u);
    case 1:
      return std::make_shared<GammaBlock>(prior_.a_sigma + 0.5 * N * T,
                                          prior_.b_sigma + 0.5 * residual_ss(data_, th.head(k), u));
    case 2:
      return std::make_shared<GammaBlock>(prior_.a_lambda + N, prior_.b_lambda + u.sum());
    case 3:
      if (complete_data_) return u_conditional(th);
      [[fallthrough]];
    default:
      throw ArgumentError(name() + ": no conditional for block " + std::to_string(block));
  }
}

Vec SfmExpModel::sample_latent(const Vec& theta, Rng& rng) const {
  if (complete_data_) return ModelKernel::sample_latent(theta, rng);
  return u_conditional(theta)->sample(rng);
}

ChainState SfmExpModel::initial_state() const {
  const Eigen::Index k = data_.k();
  const Vec beta = ols_beta(data_);
  const double s2 = std::max((data_.y - data_.x * beta).squaredNorm() / static_cast<double>(data_.y.size()), 1e-8);
  Vec theta(layout_.size());
  theta.head(k) = beta;
  theta(k) = 1.0 / s2;
  theta(k + 1) = 1.0 / std::sqrt(s2);
  if (complete_data_) theta.segment(k + 2, data_.N).setConstant(std::sqrt(s2));
  return {theta, Vec()};
}

VBResult SfmExpModel::fit_vb(const VbConfig& config) const {
  const SfmExpVb vb = sfm_exp_vb(prior_, data_, config.tol > 0.0 ? config.tol : 1e-8, config.max_iter);
  std::vector<BlockDensityPtr> factors{std::make_shared<NormalBlock>(vb.beta, vb.V),
                                       std::make_shared<GammaBlock>(vb.a_sigma, vb.b_sigma),
                                       std::make_shared<GammaBlock>(vb.a_lambda, vb.b_lambda)};
  if (complete_data_)
    factors.push_back(std::make_shared<TruncNormalBlock>(vb.u_loc, Vec::Constant(data_.N, vb.u_scale)));
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
             {"mu", vb.u_loc},
             {"upsilon", Mat::Constant(1, 1, vb.u_scale)}};
  return r;
}

}  // namespace vbmdd
