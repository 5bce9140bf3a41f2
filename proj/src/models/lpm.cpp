#include "vbmdd/models/lpm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "vbmdd/error.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Adapts Rng to the standard UniformRandomBitGenerator interface.
struct RngBits {
  using result_type = std::uint64_t;
  Rng* rng;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return rng->next_u64(); }
};

bool is_spd(const Mat& a) {
  Eigen::LLT<Mat> llt(a);
  return llt.info() == Eigen::Success && a.allFinite();
}

double log_y_factorial(const Vec& y) {
  double s = 0.0;
  for (Eigen::Index r = 0; r < y.size(); ++r) s += std::lgamma(y(r) + 1.0);
  return s;
}

// Gauss-Hermite rule for weight exp(-x^2) by the Golub-Welsch eigenproblem.
void gauss_hermite(int n, Vec& nodes, Vec& log_weights) {
  Mat J = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  nodes = es.eigenvalues();
  log_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v = es.eigenvectors()(0, i);
    log_weights(i) = 0.5 * std::log(std::numbers::pi) + std::log(v * v);
  }
}

// ln p(y_i | u) + ln N(u; mu, P^{-1}) without the ln y! and normalizing constants.
struct SubjectTarget {
  const Vec& y;
  const Vec& eta0;
  const Mat& Z;
  const Vec& mu;
  const Mat& P;

  double operator()(const Vec& u) const {
    const Vec eta = eta0 + Z * u;
    const Vec d = u - mu;
    return y.dot(eta) - eta.array().exp().sum() - 0.5 * d.dot(P * d);
  }
};

double subject_log_integral(const SubjectTarget& f, int nodes_per_dim, const Vec& nodes, const Vec& log_w) {
  const Eigen::Index m = f.mu.size();
  Vec u = f.mu;
  double fu = f(u);
  Mat H;
  for (int it = 0; it < 200; ++it) {
    const Vec lam = (f.eta0 + f.Z * u).array().exp().matrix();
    const Vec g = f.Z.transpose() * (f.y - lam) - f.P * (u - f.mu);
    H = f.Z.transpose() * lam.asDiagonal() * f.Z + f.P;
    const Vec step = H.llt().solve(g);
    double s = 1.0, fn = f(u + step);
    while (!(fn >= fu) && s > 1e-12) {
      s *= 0.5;
      fn = f(u + s * step);
    }
    if (!(fn >= fu)) break;
    u += s * step;
    fu = fn;
    if (s * step.norm() < 1e-12 * (1.0 + u.norm())) break;
  }
  const Vec lam = (f.eta0 + f.Z * u).array().exp().matrix();
  H = f.Z.transpose() * lam.asDiagonal() * f.Z + f.P;
  Eigen::LLT<Mat> llt(H);
  if (llt.info() != Eigen::Success) throw NumericError("LPM integrated likelihood: curvature at the mode is not positive");
  const Mat Lt_inv = llt.matrixU().solve(Mat::Identity(m, m));  // L^{-T}
  const double half_log_det = llt.matrixLLT().diagonal().array().log().sum();

  const int n = nodes_per_dim;
  const int total = m == 1 ? n : n * n;
  std::vector<double> terms(static_cast<std::size_t>(total));
  Vec x(m);
  for (int j = 0; j < total; ++j) {
    double lw = 0.0;
    int rest = j;
    for (Eigen::Index d = 0; d < m; ++d) {
      const int idx = rest % n;
      rest /= n;
      x(d) = nodes(idx);
      lw += log_w(idx);
    }
    terms[static_cast<std::size_t>(j)] = lw + x.squaredNorm() + f(u + std::sqrt(2.0) * Lt_inv * x);
  }
  return log_sum_exp(terms) + 0.5 * static_cast<double>(m) * std::log(2.0) - half_log_det;
}

struct Dims {
  Eigen::Index k, m, N, T, d;
  explicit Dims(const LpmData& data)
      : k(data.k()), m(data.m()), N(data.N), T(data.T), d(data.k() + data.N * data.m()) {}
  Eigen::Index u_at(Eigen::Index i) const { return k + i * m; }
};

// Linear predictor a + C gamma.
Vec linear_predictor(const LpmData& data, const Dims& D, const Vec& gamma) {
  Vec eta = data.a + data.X * gamma.head(D.k);
  for (Eigen::Index i = 0; i < D.N; ++i)
    eta.segment(i * D.T, D.T) += data.Z.middleRows(i * D.T, D.T) * gamma.segment(D.u_at(i), D.m);
  return eta;
}

// diag(C V C') computed row by row from the beta and subject blocks.
Vec predictor_variances(const LpmData& data, const Dims& D, const Mat& V) {
  Vec out(data.y.size());
  const Mat Vbb = V.topLeftCorner(D.k, D.k);
  for (Eigen::Index i = 0; i < D.N; ++i) {
    const Mat Vbu = V.block(0, D.u_at(i), D.k, D.m);
    const Mat Vuu = V.block(D.u_at(i), D.u_at(i), D.m, D.m);
    for (Eigen::Index t = 0; t < D.T; ++t) {
      const Eigen::Index r = i * D.T + t;
      const Vec x = data.X.row(r).transpose();
      const Vec z = data.Z.row(r).transpose();
      out(r) = x.dot(Vbb * x) + 2.0 * x.dot(Vbu * z) + z.dot(Vuu * z);
    }
  }
  return out;
}

// C' diag(w) C as a dense (k + Nm) square matrix.
Mat weighted_gram(const LpmData& data, const Dims& D, const Vec& w) {
  Mat G = Mat::Zero(D.d, D.d);
  G.topLeftCorner(D.k, D.k) = data.X.transpose() * w.asDiagonal() * data.X;
  for (Eigen::Index i = 0; i < D.N; ++i) {
    const auto Xi = data.X.middleRows(i * D.T, D.T);
    const auto Zi = data.Z.middleRows(i * D.T, D.T);
    const auto wi = w.segment(i * D.T, D.T).asDiagonal();
    const Mat xz = Xi.transpose() * wi * Zi;
    G.block(0, D.u_at(i), D.k, D.m) = xz;
    G.block(D.u_at(i), 0, D.m, D.k) = xz.transpose();
    G.block(D.u_at(i), D.u_at(i), D.m, D.m) = Zi.transpose() * wi * Zi;
  }
  return G;
}

Vec design_transpose_times(const LpmData& data, const Dims& D, const Vec& r) {
  Vec out(D.d);
  out.head(D.k) = data.X.transpose() * r;
  for (Eigen::Index i = 0; i < D.N; ++i)
    out.segment(D.u_at(i), D.m) = data.Z.middleRows(i * D.T, D.T).transpose() * r.segment(i * D.T, D.T);
  return out;
}

struct PriorCache {
  Mat Vb_inv, Vmu_inv;
  double log_det_Vb, log_det_Vmu, log_det_S;
  explicit PriorCache(const LpmPrior& p)
      : Vb_inv(inverse_spd(p.V_beta, "LPM V_beta")),
        Vmu_inv(inverse_spd(p.V_mu, "LPM V_mu")),
        log_det_Vb(log_det_spd(p.V_beta)),
        log_det_Vmu(log_det_spd(p.V_mu)),
        log_det_S(log_det_spd(p.S)) {}
};

// Lambda = blockdiag(V_beta^{-1}, I_N (x) E[P]) and the prior location (beta_, iota (x) mu).
void prior_precision(const Dims& D, const PriorCache& pc, const LpmPrior& prior, const LpmVb& q, Mat& Lambda,
                     Vec& gamma0) {
  const Mat EP = q.nu * inverse_spd(q.S, "LPM q(Sigma^{-1}) scale");
  Lambda = Mat::Zero(D.d, D.d);
  Lambda.topLeftCorner(D.k, D.k) = pc.Vb_inv;
  gamma0.resize(D.d);
  gamma0.head(D.k) = prior.beta;
  for (Eigen::Index i = 0; i < D.N; ++i) {
    Lambda.block(D.u_at(i), D.u_at(i), D.m, D.m) = EP;
    gamma0.segment(D.u_at(i), D.m) = q.mu;
  }
}

Vec gamma_gradient(const LpmPrior& prior, const LpmData& data, const Dims& D, const PriorCache& pc, const LpmVb& q) {
  Mat Lambda;
  Vec gamma0;
  prior_precision(D, pc, prior, q, Lambda, gamma0);
  const Vec w = (linear_predictor(data, D, q.gamma) + 0.5 * predictor_variances(data, D, q.V_gamma)).array().exp().matrix();
  return design_transpose_times(data, D, data.y - w) - Lambda * (q.gamma - gamma0);
}

// Expected Poisson log-likelihood sum y(a + c'gamma) - w - ln y!.
double expected_poisson(const LpmData& data, const Dims& D, const LpmVb& q) {
  const Vec eta = linear_predictor(data, D, q.gamma);
  const Vec w = (eta + 0.5 * predictor_variances(data, D, q.V_gamma)).array().exp().matrix();
  return data.y.dot(eta) - w.sum() - log_y_factorial(data.y);
}

// Sum_i (u_i - mu)(u_i - mu)' + V_ui, plus N V_mu.
Mat subject_scatter(const Dims& D, const LpmVb& q) {
  Mat s = static_cast<double>(D.N) * q.V_mu;
  for (Eigen::Index i = 0; i < D.N; ++i) {
    const Vec d = q.gamma.segment(D.u_at(i), D.m) - q.mu;
    s += d * d.transpose() + q.V_gamma.block(D.u_at(i), D.u_at(i), D.m, D.m);
  }
  return s;
}

double elbo_terms(const LpmPrior& prior, const LpmData& data, const Dims& D, const PriorCache& pc, const LpmVb& q) {
  const double k = static_cast<double>(D.k), m = static_cast<double>(D.m), N = static_cast<double>(D.N);
  const Wishart qP(q.S, q.nu);
  const Mat EP = qP.mean();
  const double Eld = qP.expected_log_det();
  const Vec db = q.gamma.head(D.k) - prior.beta;
  const Vec dm = q.mu - prior.mu;

  const double lik = expected_poisson(data, D, q);
  const double p_beta = -0.5 * (k * kLog2Pi + pc.log_det_Vb + db.dot(pc.Vb_inv * db) +
                                (pc.Vb_inv * q.V_gamma.topLeftCorner(D.k, D.k)).trace());
  const double p_u = -0.5 * N * m * kLog2Pi + 0.5 * N * Eld - 0.5 * (EP * subject_scatter(D, q)).trace();
  const double p_mu = -0.5 * (m * kLog2Pi + pc.log_det_Vmu + dm.dot(pc.Vmu_inv * dm) + (pc.Vmu_inv * q.V_mu).trace());
  const Wishart pP(prior.S, prior.nu);
  const double p_P = 0.5 * (prior.nu - m - 1.0) * Eld - 0.5 * (prior.S * EP).trace() + pP.log_norm();
  const double h_gamma = 0.5 * static_cast<double>(D.d) * (1.0 + kLog2Pi) + 0.5 * log_det_spd(q.V_gamma);
  const double h_mu = 0.5 * m * (1.0 + kLog2Pi) + 0.5 * log_det_spd(q.V_mu);
  return lik + p_beta + p_u + p_mu + p_P + h_gamma + h_mu + qP.entropy();
}

}  // namespace

void LpmData::validate() const {
  if (N < 1 || T < 1) throw ArgumentError("LPM data: need N >= 1 subjects and T >= 1 periods");
  if (y.size() != N * T || X.rows() != N * T || Z.rows() != N * T || a.size() != N * T)
    throw ArgumentError("LPM data: y, X, Z and a must have N*T rows");
  if (X.cols() < 1 || Z.cols() < 1) throw ArgumentError("LPM data: X and Z need at least one column");
  if (!y.allFinite() || !X.allFinite() || !Z.allFinite() || !a.allFinite())
    throw ArgumentError("LPM data: non-finite values");
  for (Eigen::Index r = 0; r < y.size(); ++r)
    if (y(r) < 0.0 || y(r) != std::floor(y(r))) throw ArgumentError("LPM data: counts must be non-negative integers");
}

Vec LpmData::default_offsets(Eigen::Index N, Eigen::Index T) {
  Vec a = Vec::Constant(N * T, std::log(2.0));
  for (Eigen::Index i = 0; i < N; ++i) a(i * T) = std::log(8.0);
  return a;
}

LpmData lpm_synthetic(std::uint64_t seed, Eigen::Index N, Eigen::Index T, Eigen::Index k, Eigen::Index m,
                      const LpmTrueParams& truth) {
  if (N < 1 || T < 1 || k < 1 || m < 1) throw ArgumentError("lpm_synthetic: N, T, k, m must be positive");
  if (truth.beta.size() != k || truth.mu.size() != m || truth.Sigma.rows() != m || truth.Sigma.cols() != m)
    throw ArgumentError("lpm_synthetic: parameter dimensions do not match k and m");
  Rng rng(seed);
  LpmData d;
  d.N = N;
  d.T = T;
  d.a = LpmData::default_offsets(N, T);
  d.X.resize(N * T, k);
  d.Z.resize(N * T, m);
  d.y.resize(N * T);
  for (Eigen::Index r = 0; r < N * T; ++r)
    for (Eigen::Index j = 0; j < k; ++j) d.X(r, j) = 0.5 * rng.normal();
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index j = 0; j < m; ++j)
        d.Z(i * T + t, j) = std::pow(static_cast<double>(t) / static_cast<double>(T), static_cast<double>(j));
  const bool degenerate = truth.Sigma.isZero(0.0);
  const MvNormal ud = degenerate ? MvNormal() : MvNormal(truth.mu, truth.Sigma);
  RngBits bits{&rng};
  for (Eigen::Index i = 0; i < N; ++i) {
    const Vec u = degenerate ? truth.mu : ud.sample(rng);
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Index r = i * T + t;
      const double rate = std::exp(d.a(r) + d.X.row(r).dot(truth.beta) + d.Z.row(r).dot(u));
      d.y(r) = static_cast<double>(std::poisson_distribution<long>(rate)(bits));
    }
  }
  return d;
}

LpmPrior LpmPrior::standard(Eigen::Index k, Eigen::Index m) {
  LpmPrior p;
  p.beta = Vec::Zero(k);
  p.V_beta = 10.0 * Mat::Identity(k, k);
  p.mu = Vec::Zero(m);
  p.V_mu = 10.0 * Mat::Identity(m, m);
  p.S = Mat::Identity(m, m);
  p.nu = static_cast<double>(m) + 3.0;
  return p;
}

void LpmPrior::validate(Eigen::Index k, Eigen::Index m) const {
  if (beta.size() != k || V_beta.rows() != k || V_beta.cols() != k)
    throw ModelConfigError("LPM prior: beta and V_beta must match k");
  if (mu.size() != m || V_mu.rows() != m || V_mu.cols() != m || S.rows() != m || S.cols() != m)
    throw ModelConfigError("LPM prior: mu, V_mu and S must match m");
  if (!is_spd(V_beta) || !is_spd(V_mu) || !is_spd(S))
    throw ModelConfigError("LPM prior: V_beta, V_mu and S must be positive definite");
  if (!(nu > static_cast<double>(m) - 1.0)) throw ModelConfigError("LPM prior: nu must exceed m - 1");
}

double lpm_loglik_integrated(const LpmData& data, const Vec& beta, const Vec& mu, const Mat& P, int nodes) {
  const Eigen::Index m = data.m();
  if (m > 2) throw UnsupportedError("LPM integrated likelihood: only m <= 2 random effects are supported");
  if (nodes < 21) throw ArgumentError("LPM integrated likelihood: need at least 21 nodes per dimension");
  if (beta.size() != data.k() || mu.size() != m || P.rows() != m || P.cols() != m)
    throw ArgumentError("LPM integrated likelihood: parameter dimensions do not match the data");
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw DomainError("LPM integrated likelihood: Sigma^{-1} is not positive definite");
  const double log_det_P = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Vec gh_nodes, gh_log_w;
  gauss_hermite(nodes, gh_nodes, gh_log_w);

  const Vec eta0 = data.a + data.X * beta;
  double total = -log_y_factorial(data.y) + static_cast<double>(data.N) * 0.5 * (log_det_P - m * kLog2Pi);
  for (Eigen::Index i = 0; i < data.N; ++i) {
    const Vec yi = data.y.segment(i * data.T, data.T);
    const Vec ei = eta0.segment(i * data.T, data.T);
    const Mat Zi = data.Z.middleRows(i * data.T, data.T);
    total += subject_log_integral(SubjectTarget{yi, ei, Zi, mu, P}, nodes, gh_nodes, gh_log_w);
  }
  return total;
}

LpmVb lpm_vb(const LpmPrior& prior, const LpmData& data, double tol, int max_iter, double damping) {
  data.validate();
  prior.validate(data.k(), data.m());
  if (!(damping > 0.0 && damping <= 1.0)) throw ArgumentError("LPM VB: damping must lie in (0, 1]");
  if (!(tol > 0.0) || max_iter < 1) throw ArgumentError("LPM VB: tol must be positive and max_iter >= 1");
  const Dims D(data);
  const PriorCache pc(prior);

  LpmVb q;
  q.nu = prior.nu + static_cast<double>(D.N);
  q.gamma = Vec::Zero(D.d);
  q.gamma.head(D.k) = prior.beta;
  for (Eigen::Index i = 0; i < D.N; ++i) q.gamma.segment(D.u_at(i), D.m) = prior.mu;
  q.mu = prior.mu;
  q.V_mu = prior.V_mu;
  q.S = prior.S * (q.nu / prior.nu);
  {
    Mat Lambda;
    Vec gamma0;
    prior_precision(D, pc, prior, q, Lambda, gamma0);
    const Vec w = linear_predictor(data, D, q.gamma).array().exp().matrix();
    q.V_gamma = inverse_spd(weighted_gram(data, D, w) + Lambda, "LPM q(Gamma) precision");
  }

  double prev = -kInf;
  int drops = 0;
  for (int it = 1; it <= max_iter; ++it) {
    Mat Lambda;
    Vec gamma0;
    prior_precision(D, pc, prior, q, Lambda, gamma0);
    const Vec w =
        (linear_predictor(data, D, q.gamma) + 0.5 * predictor_variances(data, D, q.V_gamma)).array().exp().matrix();
    if (!w.allFinite()) throw NumericError("LPM VB: expected intensities overflowed at iteration " + std::to_string(it));
    q.V_gamma = symmetrize(inverse_spd(weighted_gram(data, D, w) + Lambda, "LPM q(Gamma) precision"));
    const Vec grad = design_transpose_times(data, D, data.y - w) - Lambda * (q.gamma - gamma0);
    q.gamma += damping * (q.V_gamma * grad);

    const Mat EP = q.nu * inverse_spd(q.S, "LPM q(Sigma^{-1}) scale");
    Vec usum = Vec::Zero(D.m);
    for (Eigen::Index i = 0; i < D.N; ++i) usum += q.gamma.segment(D.u_at(i), D.m);
    const Mat prec_mu = pc.Vmu_inv + static_cast<double>(D.N) * EP;
    q.V_mu = symmetrize(inverse_spd(prec_mu, "LPM q(mu) precision"));
    q.mu = q.V_mu * (pc.Vmu_inv * prior.mu + EP * usum);

    q.S = symmetrize(prior.S + subject_scatter(D, q));

    const double elbo = elbo_terms(prior, data, D, pc, q);
    if (!std::isfinite(elbo)) throw NumericError("LPM VB: non-finite bound at iteration " + std::to_string(it));
    q.elbo_trace.push_back(elbo);
    q.iterations = it;
    drops = elbo < prev - 1.0 ? drops + 1 : 0;
    if (drops >= 5) throw NumericError("LPM VB diverged: bound fell by more than 1 for 5 consecutive iterations");
    q.gradient_norm = gamma_gradient(prior, data, D, pc, q).norm();
    if (std::abs(elbo - prev) < tol && q.gradient_norm < 1e-8) {
      q.converged = true;
      break;
    }
    prev = elbo;
  }
  return q;
}

double lpm_vblb(const LpmPrior& prior, const LpmData& data, const LpmVb& q) {
  const Dims D(data);
  const PriorCache pc(prior);
  const double k = static_cast<double>(D.k), m = static_cast<double>(D.m), N = static_cast<double>(D.N);
  const Vec db = q.gamma.head(D.k) - prior.beta;
  const Vec dm = q.mu - prior.mu;
  const int mi = static_cast<int>(D.m);
  return expected_poisson(data, D, q) -
         0.5 * (db.dot(pc.Vb_inv * db) + (pc.Vb_inv * q.V_gamma.topLeftCorner(D.k, D.k)).trace()) -
         0.5 * pc.log_det_Vb + 0.5 * log_det_spd(q.V_gamma) -
         0.5 * (dm.dot(pc.Vmu_inv * dm) + (pc.Vmu_inv * q.V_mu).trace()) - 0.5 * pc.log_det_Vmu +
         0.5 * log_det_spd(q.V_mu) + 0.5 * prior.nu * pc.log_det_S - 0.5 * q.nu * log_det_spd(q.S) +
         ln_multivariate_gamma(mi, 0.5 * q.nu) - ln_multivariate_gamma(mi, 0.5 * prior.nu) +
         0.5 * (k + m + N * m + N * m * std::log(2.0));
}

double lpm_elbo_terms(const LpmPrior& prior, const LpmData& data, const LpmVb& q) {
  const Dims D(data);
  return elbo_terms(prior, data, D, PriorCache(prior), q);
}

Vec lpm_gamma_gradient(const LpmPrior& prior, const LpmData& data, const LpmVb& q) {
  const Dims D(data);
  return gamma_gradient(prior, data, D, PriorCache(prior), q);
}

LpmModel::LpmModel(LpmData data, LpmPrior prior, bool complete_data, int nodes)
    : data_(std::move(data)), prior_(std::move(prior)), complete_data_(complete_data), nodes_(nodes) {
  data_.validate();
  prior_.validate(data_.k(), data_.m());
  if (!complete_data_ && data_.m() > 2)
    throw UnsupportedError("LPM: the integrated kernel supports m <= 2; use the complete-data kernel");
  if (!complete_data_ && nodes_ < 21) throw ArgumentError("LPM: need at least 21 quadrature nodes per dimension");
  if (complete_data_)
    layout_.add_real("gamma", data_.k() + data_.N * data_.m());
  else
    layout_.add_real("beta", data_.k());
  layout_.add_real("mu", data_.m()).add_spd("Sigma_inv", data_.m());
  beta_prior_ = MvNormal(prior_.beta, prior_.V_beta);
  mu_prior_ = MvNormal(prior_.mu, prior_.V_mu);
  log_y_factorial_ = log_y_factorial(data_.y);
}

Vec LpmModel::pack(const Vec& beta, const Mat& u, const Vec& mu, const Mat& P) const {
  const Eigen::Index k = data_.k(), m = data_.m();
  Vec theta(layout_.size());
  Eigen::Index at = 0;
  theta.segment(at, k) = beta;
  at += k;
  if (complete_data_) {
    for (Eigen::Index i = 0; i < data_.N; ++i, at += m) theta.segment(at, m) = u.col(i);
  }
  theta.segment(at, m) = mu;
  at += m;
  theta.tail(m * (m + 1) / 2) = vech(P);
  return theta;
}

double LpmModel::log_prior(const Vec& theta) const {
  const Eigen::Index k = data_.k(), m = data_.m();
  const Eigen::Index mu_at = layout_.block(1).offset;
  const Mat P = unvech(theta.segment(layout_.block(2).offset, m * (m + 1) / 2), m);
  if (!is_spd(P)) return -kInf;
  return beta_prior_.log_pdf(theta.head(k)) + mu_prior_.log_pdf(theta.segment(mu_at, m)) +
         Wishart(prior_.S, prior_.nu).log_pdf(P);
}

double LpmModel::log_likelihood(const Vec& theta) const {
  const Eigen::Index k = data_.k(), m = data_.m(), T = data_.T;
  const Vec mu = theta.segment(layout_.block(1).offset, m);
  const Mat P = unvech(theta.segment(layout_.block(2).offset, m * (m + 1) / 2), m);
  if (!complete_data_) return lpm_loglik_integrated(data_, theta.head(k), mu, P, nodes_);
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) throw DomainError("LPM likelihood: Sigma^{-1} is not positive definite");
  const double log_det_P = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Vec eta = data_.a + data_.X * theta.head(k);
  double total = -log_y_factorial_ + static_cast<double>(data_.N) * 0.5 * (log_det_P - m * kLog2Pi);
  for (Eigen::Index i = 0; i < data_.N; ++i) {
    const Vec u = theta.segment(k + i * m, m);
    const Vec e = eta.segment(i * T, T) + data_.Z.middleRows(i * T, T) * u;
    const Vec d = u - mu;
    total += data_.y.segment(i * T, T).dot(e) - e.array().exp().sum() - 0.5 * d.dot(P * d);
  }
  return total;
}

Vec LpmModel::sample_prior(Rng& rng) const {
  const Vec beta = beta_prior_.sample(rng);
  const Vec mu = mu_prior_.sample(rng);
  const Mat P = Wishart(prior_.S, prior_.nu).sample(rng);
  Mat u(data_.m(), data_.N);
  if (complete_data_) {
    const MvNormal ud(mu, inverse_spd(P, "LPM prior draw of Sigma^{-1}"));
    for (Eigen::Index i = 0; i < data_.N; ++i) u.col(i) = ud.sample(rng);
  }
  return pack(beta, u, mu, P);
}

ChainState LpmModel::initial_state() const {
  const Mat P = prior_.nu * inverse_spd(prior_.S, "LPM S");
  const Mat u = prior_.mu.replicate(1, data_.N);
  ChainState s{pack(prior_.beta, u, prior_.mu, P), Vec()};
  if (!complete_data_) s.latent = u.reshaped();
  return s;
}

namespace {

// Multivariate random-walk Metropolis with a fixed proposal shape and a scale
// adapted by Robbins-Monro toward the usual optimal acceptance rate.
struct ShapedWalk {
  Mat chol;
  double log_scale = 0.0;
  double target = 0.234;
  long accepted = 0, tried = 0;

  explicit ShapedWalk(const Mat& cov) {
    const Eigen::Index d = cov.rows();
    chol = SpdFactor(cov, "LPM proposal covariance").lower();
    log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
    target = d == 1 ? 0.44 : 0.234;
  }
  Vec propose(const Vec& x, Rng& rng) const {
    Vec e(x.size());
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = rng.normal();
    return x + std::exp(log_scale) * (chol * e);
  }
  void record(bool accept, bool adapt, long iter) {
    if (adapt) {
      log_scale += ((accept ? 1.0 : 0.0) - target) * std::pow(static_cast<double>(iter + 1), -0.6);
    } else {
      ++tried;
      accepted += accept ? 1 : 0;
    }
  }
  double rate() const { return tried ? static_cast<double>(accepted) / static_cast<double>(tried) : 0.0; }
};

}  // namespace

PosteriorDrawSet LpmModel::sample_posterior(const ChainConfig& config, std::uint64_t seed) const {
  if (config.draws < 1 || config.burn_in < 0 || config.thin < 1) throw ArgumentError("chain config: invalid sizes");
  const Eigen::Index k = data_.k(), m = data_.m(), N = data_.N, T = data_.T;
  const LpmVb vb = lpm_vb(prior_, data_);
  const Dims D(data_);
  Rng rng(seed);

  Vec beta = vb.gamma.head(k);
  Mat u(m, N);
  for (Eigen::Index i = 0; i < N; ++i) u.col(i) = vb.gamma.segment(D.u_at(i), m);
  Vec mu = vb.mu;
  Mat P = vb.nu * inverse_spd(vb.S, "LPM q(Sigma^{-1}) scale");
  ShapedWalk beta_walk(vb.V_gamma.topLeftCorner(k, k));
  std::vector<ShapedWalk> u_walk;
  u_walk.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) u_walk.emplace_back(vb.V_gamma.block(D.u_at(i), D.u_at(i), m, m));
  const Mat Vmu_inv = inverse_spd(prior_.V_mu, "LPM V_mu");

  // Subject effects enter eta through z_it' u_i; the beta part is kept separately.
  Vec zu(N * T);
  for (Eigen::Index i = 0; i < N; ++i) zu.segment(i * T, T) = data_.Z.middleRows(i * T, T) * u.col(i);
  Vec xb = data_.X * beta;
  auto poisson_part = [&](const Vec& eta, Eigen::Index from, Eigen::Index len) {
    return data_.y.segment(from, len).dot(eta.segment(from, len)) - eta.segment(from, len).array().exp().sum();
  };

  PosteriorDrawSet out;
  out.burn_in = config.burn_in;
  out.thin = config.thin;
  out.seed = seed;
  out.theta.resize(layout_.size(), config.draws);
  if (!complete_data_) out.latent.resize(N * m, config.draws);
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.draws) * config.thin;
  int kept = 0;
  for (long it = 0; it < total; ++it) {
    const bool adapt = it < config.burn_in;
    {
      const Vec prop = beta_walk.propose(beta, rng);
      const Vec xb_new = data_.X * prop;
      const Vec base = data_.a + zu;
      const double ratio = poisson_part(base + xb_new, 0, N * T) + beta_prior_.log_pdf(prop) -
                           poisson_part(base + xb, 0, N * T) - beta_prior_.log_pdf(beta);
      const bool accept = std::log(rng.uniform()) < ratio;
      beta_walk.record(accept, adapt, it);
      if (accept) {
        beta = prop;
        xb = xb_new;
      }
    }
    const Vec base = data_.a + xb;
    for (Eigen::Index i = 0; i < N; ++i) {
      auto& walk = u_walk[static_cast<std::size_t>(i)];
      const Vec cur = u.col(i);
      const Vec prop = walk.propose(cur, rng);
      const auto Zi = data_.Z.middleRows(i * T, T);
      const auto yi = data_.y.segment(i * T, T);
      const Vec e_new = base.segment(i * T, T) + Zi * prop;
      const Vec e_old = base.segment(i * T, T) + zu.segment(i * T, T);
      const Vec dn = prop - mu, dc = cur - mu;
      const double ratio = yi.dot(e_new) - e_new.array().exp().sum() - 0.5 * dn.dot(P * dn) - yi.dot(e_old) +
                           e_old.array().exp().sum() + 0.5 * dc.dot(P * dc);
      const bool accept = std::log(rng.uniform()) < ratio;
      walk.record(accept, adapt, it);
      if (accept) {
        u.col(i) = prop;
        zu.segment(i * T, T) = Zi * prop;
      }
    }
    try {
      const Mat prec = Vmu_inv + static_cast<double>(N) * P;
      const Mat cov = symmetrize(inverse_spd(prec, "LPM mu conditional"));
      mu = MvNormal(cov * (Vmu_inv * prior_.mu + P * u.rowwise().sum()), cov).sample(rng);
      const Mat dev = u.colwise() - mu;
      P = Wishart(symmetrize(prior_.S + dev * dev.transpose()), prior_.nu + static_cast<double>(N)).sample(rng);
    } catch (const NumericError& e) {
      throw NumericError(name() + " iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      out.theta.col(kept) = pack(beta, u, mu, P);
      if (!complete_data_) out.latent.col(kept) = u.reshaped();
      ++kept;
    }
  }

  auto check = [&](const ShapedWalk& w, const std::string& what) {
    const double r = w.rate();
    if (r < 0.05 || r > 0.95) {
      std::ostringstream os;
      os << name() << ": acceptance rate " << r << " for " << what << " outside [0.05, 0.95]";
      out.warnings.push_back(os.str());
    }
  };
  check(beta_walk, "beta");
  for (Eigen::Index i = 0; i < N; ++i) check(u_walk[static_cast<std::size_t>(i)], "u_" + std::to_string(i));
  return out;
}

VBResult LpmModel::fit_vb(const VbConfig& config) const {
  const LpmVb vb = lpm_vb(prior_, data_, config.tol > 0.0 ? config.tol : 1e-6, config.max_iter,
                          config.damping > 0.0 ? config.damping : 0.5);
  const Eigen::Index k = data_.k();
  BlockDensityPtr first = complete_data_ ? std::make_shared<NormalBlock>(vb.gamma, vb.V_gamma)
                                         : std::make_shared<NormalBlock>(Vec(vb.gamma.head(k)),
                                                                         Mat(vb.V_gamma.topLeftCorner(k, k)));
  std::vector<BlockDensityPtr> factors{first, std::make_shared<NormalBlock>(vb.mu, vb.V_mu),
                                       std::make_shared<WishartBlock>(vb.S, vb.nu)};
  VBResult r;
  r.q = std::make_shared<ProductDensity>("vb", layout_, factors);
  r.elbo_trace = vb.elbo_trace;
  r.elbo = vb.elbo_trace.back();
  r.iterations = vb.iterations;
  r.converged = vb.converged;
  r.status = vb.converged ? "converged" : "max_iter reached";
  r.hyper = {{"gamma", vb.gamma},     {"V_gamma", vb.V_gamma}, {"mu", vb.mu},
             {"V_mu", vb.V_mu},       {"S", vb.S},             {"nu", Mat::Constant(1, 1, vb.nu)},
             {"gradient_norm", Mat::Constant(1, 1, vb.gradient_norm)}};
  return r;
}

}  // namespace vbmdd
