#pragma once

#include <cstdint>

#include "vbmdd/model/kernel.hpp"

namespace vbmdd {

/// Y = X A + E with rows x_t = (1, y_{t-1}', ..., y_{t-p}').
struct VarData {
  Mat Y;  // T x N
  Mat X;  // T x K, K = 1 + pN
  int p = 0;

  Eigen::Index T() const { return Y.rows(); }
  Eigen::Index N() const { return Y.cols(); }
  Eigen::Index K() const { return X.cols(); }

  /// Builds lags from a (T + p) x N panel of levels; the first p rows are presample.
  static VarData from_levels(const Mat& levels, int p);
};

struct VarTrueParams {
  Mat A;      // K x N
  Mat Sigma;  // N x N
};

/// Simulates T + p periods after 100 discarded burn-in periods. Throws
/// ArgumentError when the companion matrix has spectral radius >= 1.
VarData var_synthetic(std::uint64_t seed, Eigen::Index N, Eigen::Index T, int p, const VarTrueParams& truth);

/// A | Sigma ~ MN(A_, Sigma, V_), Sigma^{-1} ~ W(S_^{-1}, nu_).
struct VarConjugatePrior {
  Mat A, V, S;
  double nu = 0.0;
  /// A_ = 0, V_ = v I, S_ = I, nu_ = N + 2.
  static VarConjugatePrior standard(Eigen::Index N, int p, double v = 10.0);
  void validate(Eigen::Index N, Eigen::Index K) const;
};

/// alpha = vec(A) ~ N(alpha_, V__), independent of Sigma^{-1} ~ W(S_^{-1}, nu_).
/// vec stacks the columns of the K x N matrix A, so alpha holds one equation per block of K.
struct VarIndependentPrior {
  Vec alpha;
  Mat V, S;
  double nu = 0.0;
  static VarIndependentPrior standard(Eigen::Index N, int p, double v = 10.0);
  void validate(Eigen::Index N, Eigen::Index K) const;
};

/// Normal-Wishart parameters: A | P ~ MN(A, P^{-1}, V), P ~ W(S^{-1}, nu).
struct VarNormalWishart {
  Mat A, V, S;
  double nu = 0.0;
};

VarNormalWishart var_exact_posterior(const VarConjugatePrior& prior, const VarData& data);
double var_exact_log_mdd(const VarConjugatePrior& prior, const VarData& data);
/// ELBO of the joint (unfactorized) q, which is the exact posterior, evaluated term by term.
double var_joint_elbo(const VarConjugatePrior& prior, const VarData& data);

/// Factorized VB: q(A) = MN(A*, S*/nu*, V*), q(P) = W(S*^{-1}, nu*).
struct VarConjugateVb {
  Mat A, V, S;
  double nu = 0.0;
  double elbo = 0.0;
};
VarConjugateVb var_vb_conjugate(const VarConjugatePrior& prior, const VarData& data);

struct VarIndependentVb {
  Vec alpha;
  Mat V, S;
  double nu = 0.0;
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
};
VarIndependentVb var_vb_independent(const VarIndependentPrior& prior, const VarData& data, double tol = 1e-8,
                                    int max_iter = 500);
/// ln MDD_VBLB.VAR.I at the given q (valid when S and nu are at their optimum given q(alpha)).
double var_independent_vblb(const VarIndependentPrior& prior, const VarData& data, const Vec& alpha, const Mat& V,
                            const Mat& S, double nu);

/// Kronecker product a (x) b.
Mat kron(const Mat& a, const Mat& b);

/// Blocks "alpha" (vec A) and "Sigma_inv" (SPD N x N).
class VarModelBase : public ModelKernel {
 public:
  explicit VarModelBase(VarData data);
  const ParamLayout& layout() const override { return layout_; }
  double log_likelihood(const Vec& theta) const override;
  bool has_conditionals() const override { return true; }
  const VarData& data() const { return data_; }
  Mat coefficients(const Vec& theta) const;
  Mat precision(const Vec& theta) const { return layout_.matrix(theta, 1); }
  /// (Y - XA)'(Y - XA) from the sufficient statistics.
  Mat residual_cross(const Mat& A) const;

 protected:
  Vec pack(const Mat& A, const Mat& P) const;
  VarData data_;
  Mat yy_, xy_, xx_;
  ParamLayout layout_;
};

class VarConjugateModel final : public VarModelBase {
 public:
  VarConjugateModel(VarData data, VarConjugatePrior prior);
  std::string name() const override { return "var-conjugate"; }
  double log_prior(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  BlockDensityPtr conditional(std::size_t block, const ChainState& state) const override;
  ChainState initial_state() const override;
  /// I.i.d. draws from the exact posterior (burn-in and thinning are ignored).
  PosteriorDrawSet sample_posterior(const ChainConfig& config, std::uint64_t seed) const override;
  VBResult fit_vb(const VbConfig& config) const override;
  std::optional<double> exact_log_mdd() const override { return var_exact_log_mdd(prior_, data_); }
  const VarConjugatePrior& prior() const { return prior_; }

 private:
  VarConjugatePrior prior_;
  VarNormalWishart post_;
  Mat v_prior_inv_;
  double v_prior_log_det_ = 0.0;
};

class VarIndependentModel final : public VarModelBase {
 public:
  VarIndependentModel(VarData data, VarIndependentPrior prior);
  std::string name() const override { return "var-independent"; }
  double log_prior(const Vec& theta) const override;
  bool can_sample_prior() const override { return true; }
  Vec sample_prior(Rng& rng) const override;
  BlockDensityPtr conditional(std::size_t block, const ChainState& state) const override;
  ChainState initial_state() const override;
  VBResult fit_vb(const VbConfig& config) const override;
  const VarIndependentPrior& prior() const { return prior_; }

 private:
  VarIndependentPrior prior_;
  MvNormal alpha_prior_;
  Mat v_prior_inv_;
};

}  // namespace vbmdd
