#pragma once

#include "vbmdd/stats/linalg.hpp"
#include "vbmdd/stats/rng.hpp"

namespace vbmdd {

struct MvNormalParams {
  Vec mean;
  Mat covariance;
};

struct MatricNormalParams {
  Mat mean;     // K x N
  Mat row_cov;  // K x K
  Mat col_cov;  // N x N
};

/// Wishart W(S^{-1}, dof) over SPD matrices P:
///   ln p(P) = ((dof-N-1)/2) ln|P| - tr(S P)/2 - (dof N/2) ln 2 + (dof/2) ln|S| - ln Gamma_N(dof/2),
/// so E[P] = dof * S^{-1}. `scale_inverse` holds S. This is the only Wishart
/// convention used in the library.
struct WishartParams {
  Mat scale_inverse;
  double dof = 0.0;
};

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

/// Normal(location, scale^2) truncated to [0, inf).
struct TruncNormalParams {
  double location = 0.0;
  double scale = 1.0;
};

class MvNormal {
 public:
  MvNormal() = default;
  explicit MvNormal(MvNormalParams p);
  MvNormal(Vec mean, const Mat& covariance) : MvNormal(MvNormalParams{std::move(mean), covariance}) {}

  const Vec& mean() const { return p_.mean; }
  const Mat& covariance() const { return p_.covariance; }
  const SpdFactor& factor() const { return chol_; }
  Eigen::Index dim() const { return p_.mean.size(); }

  double log_pdf(const Vec& x) const;
  Vec sample(Rng& rng) const;
  double entropy() const;

 private:
  MvNormalParams p_;
  SpdFactor chol_;
};

class MatricNormal {
 public:
  MatricNormal() = default;
  explicit MatricNormal(MatricNormalParams p);

  const MatricNormalParams& params() const { return p_; }
  double log_pdf(const Mat& x) const;
  Mat sample(Rng& rng) const;

 private:
  MatricNormalParams p_;
  SpdFactor row_, col_;
};

class Wishart {
 public:
  Wishart() = default;
  explicit Wishart(WishartParams p);
  Wishart(const Mat& scale_inverse, double dof) : Wishart(WishartParams{scale_inverse, dof}) {}

  const WishartParams& params() const { return p_; }
  Eigen::Index dim() const { return p_.scale_inverse.rows(); }
  Mat mean() const;
  double expected_log_det() const;
  double entropy() const;
  /// Normalizing constant: ln p(P) = ((dof-N-1)/2) ln|P| - tr(S P)/2 + log_norm().
  double log_norm() const { return log_norm_; }

  double log_pdf(const Mat& p) const;
  Mat sample(Rng& rng) const;

 private:
  WishartParams p_;
  SpdFactor s_;
  Mat scale_lower_;  // Cholesky factor of S^{-1}
  double log_norm_ = 0.0;
};

class GammaDist {
 public:
  GammaDist() = default;
  explicit GammaDist(GammaParams p);
  GammaDist(double shape, double rate) : GammaDist(GammaParams{shape, rate}) {}

  double shape() const { return p_.shape; }
  double rate() const { return p_.rate; }
  double mean() const { return p_.shape / p_.rate; }
  double expected_log() const;
  double entropy() const;
  double log_pdf(double x) const;
  double sample(Rng& rng) const;

 private:
  GammaParams p_;
};

/// Standard gamma(shape, 1) variate (Marsaglia-Tsang, with the u^{1/a} boost below shape 1).
double sample_standard_gamma(double shape, Rng& rng);

class TruncNormal {
 public:
  TruncNormal() = default;
  explicit TruncNormal(TruncNormalParams p);
  TruncNormal(double location, double scale) : TruncNormal(TruncNormalParams{location, scale}) {}

  double location() const { return p_.location; }
  double scale() const { return p_.scale; }
  double mean() const;
  double variance() const;
  double entropy() const;
  double log_pdf(double x) const;
  /// Inversion when location/scale >= -5, exponential-proposal rejection below.
  double sample(Rng& rng) const;

 private:
  TruncNormalParams p_;
};

}  // namespace vbmdd
