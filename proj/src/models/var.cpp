#include "vbmdd/models/var.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec vec(const Mat& a) { return Eigen::Map<const Vec>(a.data(), a.size()); }

Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols) { return Eigen::Map<const Mat>(v.data(), rows, cols); }

double log_det_or_inf(const Mat& p) {
  Eigen::LLT<Mat> llt(p);
  if (llt.info() != Eigen::Success) return -kInf;
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

void require_spd(const Mat& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw ModelConfigError(std::string(what) + ": expected order " + std::to_string(n));
  require_symmetric(m, what);
  if (Eigen::LLT<Mat>(m).info() != Eigen::Success) throw ModelConfigError(std::string(what) + " is not positive definite");
}

void require_dof(double nu, Eigen::Index n) {
  if (!(nu > static_cast<double>(n) - 1.0))
    throw ModelConfigError("Wishart prior dof " + std::to_string(nu) + " must exceed N-1 = " + std::to_string(n - 1));
}

// Sum over equation pairs of tr(XX V_ij), the expected extra cross-product from q(alpha).
Mat spread_cross(const Mat& xx, const Mat& v, Eigen::Index n, Eigen::Index k) {
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = (xx.array() * v.block(i * k, j * k, k, k).transpose().array()).sum();
  return symmetrize(m);
}

Mat ols(const VarData& d) {
  if (d.T() == 0) return Mat::Zero(d.K(), d.N());
  return d.X.completeOrthogonalDecomposition().solve(d.Y);
}
}  // namespace

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

VarData VarData::from_levels(const Mat& levels, int p) {
  if (p < 0) throw ArgumentError("VAR: lag order must be nonnegative");
  if (levels.rows() < p) throw ArgumentError("VAR: fewer rows than the lag order");
  const Eigen::Index n = levels.cols(), t = levels.rows() - p, k = 1 + p * n;
  VarData d;
  d.p = p;
  d.Y = levels.bottomRows(t);
  d.X.resize(t, k);
  for (Eigen::Index r = 0; r < t; ++r) {
    d.X(r, 0) = 1.0;
    for (int l = 1; l <= p; ++l) d.X.row(r).segment(1 + (l - 1) * n, n) = levels.row(r + p - l);
  }
  return d;
}

VarData var_synthetic(std::uint64_t seed, Eigen::Index N, Eigen::Index T, int p, const VarTrueParams& truth) {
  const Eigen::Index k = 1 + p * N;
  if (N < 1 || T < 0 || p < 0) throw ArgumentError("var_synthetic: invalid sizes");
  if (truth.A.rows() != k || truth.A.cols() != N) throw ArgumentError("var_synthetic: A must be K x N");
  if (p > 0) {
    Mat comp = Mat::Zero(N * p, N * p);
    for (int l = 0; l < p; ++l) comp.block(0, l * N, N, N) = truth.A.middleRows(1 + l * N, N).transpose();
    if (p > 1) comp.bottomLeftCorner(N * (p - 1), N * (p - 1)).setIdentity();
    const double radius = Eigen::EigenSolver<Mat>(comp, false).eigenvalues().cwiseAbs().maxCoeff();
    if (!(radius < 1.0)) {
      std::ostringstream msg;
      msg << "var_synthetic: companion spectral radius " << radius << " is not below 1";
      throw ArgumentError(msg.str());
    }
  }
  const SpdFactor sig(truth.Sigma, "var_synthetic Sigma");
  Rng rng(seed);
  const Eigen::Index burn = 100, total = burn + p + T;
  Mat y = Mat::Zero(total, N);
  Vec x(k), z(N);
  for (Eigen::Index t = 0; t < total; ++t) {
    x(0) = 1.0;
    for (int l = 1; l <= p; ++l)
      x.segment(1 + (l - 1) * N, N) = t - l >= 0 ? Vec(y.row(t - l).transpose()) : Vec::Zero(N);
    for (Eigen::Index i = 0; i < N; ++i) z(i) = rng.normal();
    y.row(t) = (truth.A.transpose() * x + sig.lower() * z).transpose();
  }
  return VarData::from_levels(y.bottomRows(p + T), p);
}

VarConjugatePrior VarConjugatePrior::standard(Eigen::Index N, int p, double v) {
  const Eigen::Index k = 1 + p * N;
  return {Mat::Zero(k, N), v * Mat::Identity(k, k), Mat::Identity(N, N), static_cast<double>(N) + 2.0};
}

void VarConjugatePrior::validate(Eigen::Index n, Eigen::Index k) const {
  if (A.rows() != k || A.cols() != n) throw ModelConfigError("VAR prior mean must be K x N");
  require_spd(V, k, "VAR prior V");
  require_spd(S, n, "VAR prior S");
  require_dof(nu, n);
}

VarIndependentPrior VarIndependentPrior::standard(Eigen::Index N, int p, double v) {
  const Eigen::Index k = 1 + p * N;
  return {Vec::Zero(N * k), v * Mat::Identity(N * k, N * k), Mat::Identity(N, N), static_cast<double>(N) + 2.0};
}

void VarIndependentPrior::validate(Eigen::Index n, Eigen::Index k) const {
  if (alpha.size() != n * k) throw ModelConfigError("VAR prior mean must have N K entries");
  require_spd(V, n * k, "VAR prior V");
  require_spd(S, n, "VAR prior S");
  require_dof(nu, n);
}

VarNormalWishart var_exact_posterior(const VarConjugatePrior& prior, const VarData& data) {
  prior.validate(data.N(), data.K());
  const Mat vinv = inverse_spd(prior.V, "VAR prior V");
  VarNormalWishart post;
  post.V = inverse_spd(symmetrize(vinv + data.X.transpose() * data.X), "VAR posterior V");
  post.A = post.V * (vinv * prior.A + data.X.transpose() * data.Y);
  post.nu = static_cast<double>(data.T()) + prior.nu;
  const Mat e = data.Y - data.X * post.A;
  const Mat d = post.A - prior.A;
  post.S = symmetrize(e.transpose() * e + prior.S + d.transpose() * vinv * d);
  return post;
}

double var_exact_log_mdd(const VarConjugatePrior& prior, const VarData& data) {
  const VarNormalWishart post = var_exact_posterior(prior, data);
  const double n = static_cast<double>(data.N()), t = static_cast<double>(data.T());
  const int ni = static_cast<int>(data.N());
  return -0.5 * n * t * kLnPi + ln_multivariate_gamma(ni, 0.5 * post.nu) - ln_multivariate_gamma(ni, 0.5 * prior.nu) +
         0.5 * n * (log_det_spd(post.V, "VAR posterior V") - log_det_spd(prior.V, "VAR prior V")) +
         0.5 * prior.nu * log_det_spd(prior.S, "VAR prior S") - 0.5 * post.nu * log_det_spd(post.S, "VAR posterior S");
}

double var_joint_elbo(const VarConjugatePrior& prior, const VarData& data) {
  const VarNormalWishart post = var_exact_posterior(prior, data);
  const double n = static_cast<double>(data.N()), t = static_cast<double>(data.T()), k = static_cast<double>(data.K());
  const Wishart qp(post.S, post.nu), pp(prior.S, prior.nu);
  const double elnp = qp.expected_log_det();
  const Mat ep = qp.mean();
  // Q(A) = (A - A_bar)' V_bar^{-1} (A - A_bar) + (S_bar - S_), and E[tr(P (A - A_bar)' V_bar^{-1} (A - A_bar))] = K N.
  const Mat r = post.S - prior.S;
  const double e_joint = -0.5 * n * (t + k) * kLnTwoPi - 0.5 * n * log_det_spd(prior.V) +
                         0.5 * (t + k + prior.nu - n - 1.0) * elnp - 0.5 * ((ep.array() * r.array()).sum() + k * n) -
                         0.5 * (prior.S.array() * ep.array()).sum() + pp.log_norm();
  const double entropy = qp.entropy() + 0.5 * n * k * (1.0 + kLnTwoPi) + 0.5 * n * log_det_spd(post.V) - 0.5 * k * elnp;
  return e_joint + entropy;
}

VarConjugateVb var_vb_conjugate(const VarConjugatePrior& prior, const VarData& data) {
  const VarNormalWishart post = var_exact_posterior(prior, data);
  const double n = static_cast<double>(data.N()), t = static_cast<double>(data.T()), k = static_cast<double>(data.K());
  VarConjugateVb vb;
  vb.A = post.A;
  vb.V = post.V;
  vb.nu = t + k + prior.nu;
  vb.S = vb.nu / (t + prior.nu) * post.S;
  const int ni = static_cast<int>(data.N());
  vb.elbo = -0.5 * n * t * kLnPi + 0.5 * n * k * (kLn2 + 1.0) +
            0.5 * n * ((t + prior.nu) * std::log(t + prior.nu) - vb.nu * std::log(vb.nu)) +
            ln_multivariate_gamma(ni, 0.5 * vb.nu) - ln_multivariate_gamma(ni, 0.5 * prior.nu) +
            0.5 * n * (log_det_spd(post.V) - log_det_spd(prior.V)) +
            0.5 * (prior.nu * log_det_spd(prior.S) - (t + prior.nu) * log_det_spd(post.S));
  return vb;
}

double var_independent_vblb(const VarIndependentPrior& prior, const VarData& data, const Vec& alpha, const Mat& V,
                            const Mat& S, double nu) {
  const double n = static_cast<double>(data.N()), t = static_cast<double>(data.T()), k = static_cast<double>(data.K());
  const int ni = static_cast<int>(data.N());
  const SpdFactor vp(prior.V, "VAR prior V");
  const Vec d = alpha - prior.alpha;
  const double tr = vp.quad_form_inv(d) + vp.solve(V).trace();
  return 0.5 * n * k - 0.5 * n * t * kLnPi + ln_multivariate_gamma(ni, 0.5 * nu) -
         ln_multivariate_gamma(ni, 0.5 * prior.nu) + 0.5 * (log_det_spd(V) - vp.log_det()) +
         0.5 * (prior.nu * log_det_spd(prior.S) - nu * log_det_spd(S)) - 0.5 * tr;
}

VarIndependentVb var_vb_independent(const VarIndependentPrior& prior, const VarData& data, double tol, int max_iter) {
  prior.validate(data.N(), data.K());
  if (!(tol > 0.0)) throw ArgumentError("VAR VB: tolerance must be positive");
  const Eigen::Index n = data.N(), k = data.K();
  const Mat xx = data.X.transpose() * data.X, xy = data.X.transpose() * data.Y;
  const SpdFactor vp(prior.V, "VAR prior V");
  const Mat vpinv = symmetrize(vp.inverse());
  const Vec vpinv_mean = vpinv * prior.alpha;

  VarIndependentVb vb;
  vb.nu = static_cast<double>(data.T()) + prior.nu;
  const Mat e0 = data.Y - data.X * ols(data);
  vb.S = symmetrize(prior.S + e0.transpose() * e0);
  double prev = -kInf;
  for (int it = 1; it <= max_iter; ++it) {
    const Mat ep = vb.nu * inverse_spd(vb.S, "VAR VB S");
    const SpdFactor prec(symmetrize(vpinv + kron(ep, xx)), "VAR VB alpha precision");
    vb.V = symmetrize(prec.inverse());
    vb.alpha = prec.solve(Vec(vpinv_mean + vec(xy * ep)));
    const Mat a = unvec(vb.alpha, k, n);
    const Mat e = data.Y - data.X * a;
    vb.S = symmetrize(prior.S + e.transpose() * e + spread_cross(xx, vb.V, n, k));
    const double elbo = var_independent_vblb(prior, data, vb.alpha, vb.V, vb.S, vb.nu);
    vb.elbo_trace.push_back(elbo);
    vb.iterations = it;
    if (elbo - prev < tol) {
      vb.converged = true;
      break;
    }
    prev = elbo;
  }
  return vb;
}

VarModelBase::VarModelBase(VarData data) : data_(std::move(data)) {
  if (data_.X.rows() != data_.Y.rows()) throw ArgumentError("VAR: X and Y must have the same number of rows");
  yy_ = symmetrize(data_.Y.transpose() * data_.Y);
  xy_ = data_.X.transpose() * data_.Y;
  xx_ = symmetrize(data_.X.transpose() * data_.X);
  layout_.add_real("alpha", data_.N() * data_.K()).add_spd("Sigma_inv", data_.N());
}

Mat VarModelBase::coefficients(const Vec& theta) const { return unvec(layout_.slice(theta, 0), data_.K(), data_.N()); }

Mat VarModelBase::residual_cross(const Mat& A) const {
  const Mat ax = A.transpose() * xy_;
  return symmetrize(yy_ - ax - ax.transpose() + A.transpose() * xx_ * A);
}

double VarModelBase::log_likelihood(const Vec& theta) const {
  const Mat p = precision(theta);
  const double ld = log_det_or_inf(p);
  if (ld == -kInf) return -kInf;
  const double n = static_cast<double>(data_.N()), t = static_cast<double>(data_.T());
  return -0.5 * n * t * kLnTwoPi + 0.5 * t * ld - 0.5 * (p.array() * residual_cross(coefficients(theta)).array()).sum();
}

Vec VarModelBase::pack(const Mat& A, const Mat& P) const {
  Vec theta(layout_.size());
  layout_.assign(theta, 0, vec(A));
  layout_.assign(theta, 1, vech(P));
  return theta;
}

VarConjugateModel::VarConjugateModel(VarData data, VarConjugatePrior prior)
    : VarModelBase(std::move(data)), prior_(std::move(prior)) {
  prior_.validate(data_.N(), data_.K());
  post_ = var_exact_posterior(prior_, data_);
  v_prior_inv_ = inverse_spd(prior_.V, "VAR prior V");
  v_prior_log_det_ = log_det_spd(prior_.V);
}

double VarConjugateModel::log_prior(const Vec& theta) const {
  const Mat p = precision(theta);
  const double ld = log_det_or_inf(p);
  if (ld == -kInf) return -kInf;
  const double n = static_cast<double>(data_.N()), k = static_cast<double>(data_.K());
  const Mat d = coefficients(theta) - prior_.A;
  const Mat q = d.transpose() * v_prior_inv_ * d;
  return -0.5 * n * k * kLnTwoPi - 0.5 * n * v_prior_log_det_ + 0.5 * k * ld - 0.5 * (p.array() * q.array()).sum() +
         Wishart(prior_.S, prior_.nu).log_pdf(p);
}

namespace {
// A = M + L_V Z L_C' with C = P^{-1}.
Mat draw_matric_normal(const Mat& mean, const Mat& row_lower, const Mat& p, Rng& rng) {
  const Mat col_lower = SpdFactor(inverse_spd(p, "VAR precision draw"), "VAR covariance draw").lower();
  Mat z(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
  return mean + row_lower * z * col_lower.transpose();
}
}  // namespace

Vec VarConjugateModel::sample_prior(Rng& rng) const {
  const Mat p = Wishart(prior_.S, prior_.nu).sample(rng);
  const Mat lv = SpdFactor(prior_.V, "VAR prior V").lower();
  return pack(draw_matric_normal(prior_.A, lv, p, rng), p);
}

BlockDensityPtr VarConjugateModel::conditional(std::size_t block, const ChainState& state) const {
  if (block == 0) {
    const Mat p = precision(state.theta);
    return NormalBlock::from_precision(vec(post_.A), kron(p, inverse_spd(post_.V, "VAR posterior V")));
  }
  if (block != 1) throw ArgumentError("VAR has two blocks");
  const Mat a = coefficients(state.theta);
  const Mat d = a - prior_.A;
  const Mat s = symmetrize(prior_.S + residual_cross(a) + d.transpose() * v_prior_inv_ * d);
  return std::make_shared<WishartBlock>(s, prior_.nu + static_cast<double>(data_.T() + data_.K()));
}

ChainState VarConjugateModel::initial_state() const {
  return {pack(post_.A, post_.nu * inverse_spd(post_.S, "VAR posterior S")), Vec()};
}

PosteriorDrawSet VarConjugateModel::sample_posterior(const ChainConfig& config, std::uint64_t seed) const {
  if (config.draws < 1) throw ArgumentError("chain config: draws must be positive");
  Rng rng(seed);
  const Wishart wp(post_.S, post_.nu);
  const Mat lv = SpdFactor(post_.V, "VAR posterior V").lower();
  PosteriorDrawSet out;
  out.seed = seed;
  out.theta.resize(layout_.size(), config.draws);
  for (int s = 0; s < config.draws; ++s) {
    const Mat p = wp.sample(rng);
    out.theta.col(s) = pack(draw_matric_normal(post_.A, lv, p, rng), p);
  }
  return out;
}

VBResult VarConjugateModel::fit_vb(const VbConfig&) const {
  const VarConjugateVb vb = var_vb_conjugate(prior_, data_);
  VBResult r;
  auto qa = std::make_shared<NormalBlock>(vec(vb.A), kron(vb.S / vb.nu, vb.V));
  auto qp = std::make_shared<WishartBlock>(vb.S, vb.nu);
  r.q = std::make_shared<ProductDensity>("vb", layout_, std::vector<BlockDensityPtr>{qa, qp});
  r.elbo = vb.elbo;
  r.elbo_trace = {vb.elbo};
  r.iterations = 1;
  r.converged = true;
  r.status = "closed form";
  r.hyper = {{"A", vb.A}, {"V", vb.V}, {"S", vb.S}, {"nu", Mat::Constant(1, 1, vb.nu)}};
  return r;
}

VarIndependentModel::VarIndependentModel(VarData data, VarIndependentPrior prior)
    : VarModelBase(std::move(data)), prior_(std::move(prior)) {
  prior_.validate(data_.N(), data_.K());
  alpha_prior_ = MvNormal(prior_.alpha, prior_.V);
  v_prior_inv_ = symmetrize(alpha_prior_.factor().inverse());
}

double VarIndependentModel::log_prior(const Vec& theta) const {
  const Mat p = precision(theta);
  if (log_det_or_inf(p) == -kInf) return -kInf;
  return alpha_prior_.log_pdf(layout_.slice(theta, 0)) + Wishart(prior_.S, prior_.nu).log_pdf(p);
}

Vec VarIndependentModel::sample_prior(Rng& rng) const {
  const Mat p = Wishart(prior_.S, prior_.nu).sample(rng);
  Vec theta(layout_.size());
  layout_.assign(theta, 0, alpha_prior_.sample(rng));
  layout_.assign(theta, 1, vech(p));
  return theta;
}

BlockDensityPtr VarIndependentModel::conditional(std::size_t block, const ChainState& state) const {
  if (block == 0) {
    const Mat p = precision(state.theta);
    const Mat prec = symmetrize(v_prior_inv_ + kron(p, xx_));
    const SpdFactor f(prec, "VAR alpha conditional precision");
    const Vec mean = f.solve(Vec(v_prior_inv_ * prior_.alpha + vec(xy_ * p)));
    return NormalBlock::from_precision(mean, prec);
  }
  if (block != 1) throw ArgumentError("VAR has two blocks");
  const Mat s = symmetrize(prior_.S + residual_cross(coefficients(state.theta)));
  return std::make_shared<WishartBlock>(s, prior_.nu + static_cast<double>(data_.T()));
}

ChainState VarIndependentModel::initial_state() const {
  const Mat a = ols(data_);
  const double nu = static_cast<double>(data_.T()) + prior_.nu;
  const Mat s = symmetrize(prior_.S + residual_cross(a));
  return {pack(a, nu * inverse_spd(s, "VAR initial S")), Vec()};
}

VBResult VarIndependentModel::fit_vb(const VbConfig& config) const {
  const VarIndependentVb vb = var_vb_independent(prior_, data_, config.tol > 0.0 ? config.tol : 1e-8, config.max_iter);
  VBResult r;
  auto qa = std::make_shared<NormalBlock>(vb.alpha, vb.V);
  auto qp = std::make_shared<WishartBlock>(vb.S, vb.nu);
  r.q = std::make_shared<ProductDensity>("vb", layout_, std::vector<BlockDensityPtr>{qa, qp});
  r.elbo_trace = vb.elbo_trace;
  r.elbo = vb.elbo_trace.back();
  r.iterations = vb.iterations;
  r.converged = vb.converged;
  r.status = vb.converged ? "converged" : "max_iter reached";
  r.hyper = {{"alpha", vb.alpha}, {"V", vb.V}, {"S", vb.S}, {"nu", Mat::Constant(1, 1, vb.nu)}};
  return r;
}

}  // namespace vbmdd
