#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "vbmdd/stats/distributions.hpp"
#include "vbmdd/stats/linalg.hpp"
#include "vbmdd/stats/rng.hpp"

namespace vbmdd {

/// A proper density over the flat values of one parameter block. Full
/// conditionals and variational factors are both expressed this way.
///
/// Exponential-family members also expose ln p(x) = eta . phi(x) + c, which lets
/// Rao-Blackwell averages over many conditionals run as one affine reduction.
class BlockDensity {
 public:
  virtual ~BlockDensity() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double log_pdf(const Vec& x) const = 0;
  virtual Vec sample(Rng& rng) const = 0;

  virtual bool exponential_family() const { return false; }
  virtual Eigen::Index feature_dim() const { return 0; }
  /// phi(x); only for exponential-family members.
  virtual void features(const Vec& x, double* out) const;
  /// eta into `eta` (feature_dim() values); returns c.
  virtual double natural(double* eta) const;
};

using BlockDensityPtr = std::shared_ptr<const BlockDensity>;

/// Multivariate normal over the block, features [x, x_i x_j (i <= j)].
class NormalBlock final : public BlockDensity {
 public:
  NormalBlock(Vec mean, const Mat& covariance);
  /// Built from the precision; avoids an inverse when that is what the caller has.
  static std::shared_ptr<NormalBlock> from_precision(const Vec& mean, const Mat& precision);

  const MvNormal& dist() const { return dist_; }
  Eigen::Index dim() const override { return dist_.dim(); }
  double log_pdf(const Vec& x) const override { return dist_.log_pdf(x); }
  Vec sample(Rng& rng) const override { return dist_.sample(rng); }
  bool exponential_family() const override { return true; }
  Eigen::Index feature_dim() const override;
  void features(const Vec& x, double* out) const override;
  double natural(double* eta) const override;

 private:
  MvNormal dist_;
  Mat precision_;
};

/// Wishart over vech(P), features [ln|P|, vech(P) with doubled off-diagonals].
class WishartBlock final : public BlockDensity {
 public:
  WishartBlock(const Mat& scale_inverse, double dof);
  const Wishart& dist() const { return dist_; }
  Eigen::Index dim() const override;
  double log_pdf(const Vec& x) const override;
  Vec sample(Rng& rng) const override;
  bool exponential_family() const override { return true; }
  Eigen::Index feature_dim() const override { return 1 + dim(); }
  void features(const Vec& x, double* out) const override;
  double natural(double* eta) const override;

 private:
  Wishart dist_;
};

/// Independent gammas, one per element; features [ln x_i, x_i] per element.
class GammaBlock final : public BlockDensity {
 public:
  GammaBlock(Vec shape, Vec rate);
  GammaBlock(double shape, double rate) : GammaBlock(Vec::Constant(1, shape), Vec::Constant(1, rate)) {}
  const Vec& shape() const { return shape_; }
  const Vec& rate() const { return rate_; }
  Eigen::Index dim() const override { return shape_.size(); }
  double log_pdf(const Vec& x) const override;
  Vec sample(Rng& rng) const override;
  bool exponential_family() const override { return true; }
  Eigen::Index feature_dim() const override { return 2 * dim(); }
  void features(const Vec& x, double* out) const override;
  double natural(double* eta) const override;

 private:
  Vec shape_, rate_;
};

/// Independent normals truncated to [0, inf); features [x_i, x_i^2] per element.
class TruncNormalBlock final : public BlockDensity {
 public:
  TruncNormalBlock(Vec location, Vec scale);
  const std::vector<TruncNormal>& parts() const { return parts_; }
  Eigen::Index dim() const override { return static_cast<Eigen::Index>(parts_.size()); }
  double log_pdf(const Vec& x) const override;
  Vec sample(Rng& rng) const override;
  bool exponential_family() const override { return true; }
  Eigen::Index feature_dim() const override { return 2 * dim(); }
  void features(const Vec& x, double* out) const override;
  double natural(double* eta) const override;

 private:
  std::vector<TruncNormal> parts_;
};

/// Scalar positive density known on a grid of ln x: ln g(ln x) is linear between
/// nodes, so normalization, evaluation and sampling are exact for the
/// interpolant. Zero outside the grid.
class LogGridDensity final : public BlockDensity {
 public:
  /// `log_x` strictly increasing; `log_g` is the unnormalized log density of ln x.
  LogGridDensity(std::vector<double> log_x, std::vector<double> log_g);

  Eigen::Index dim() const override { return 1; }
  double log_pdf(const Vec& x) const override { return log_pdf_scalar(x(0)); }
  double log_pdf_scalar(double x) const;
  Vec sample(Rng& rng) const override;

  /// E[f(ln x)] by 5-point Gauss-Legendre on every grid cell.
  template <class F>
  double expect_log_space(F&& f) const;
  double mean() const;
  double mean_log() const;
  double mean_inverse() const;
  /// -E[ln q(x)] with q the density of x.
  double entropy() const;
  /// Probability mass in the first and last `cells` cells.
  double edge_mass(int cells) const;
  const std::vector<double>& log_x() const { return lx_; }

 private:
  double log_g_at(double lx) const;
  std::vector<double> lx_, lg_;
  std::vector<double> cum_;  // cumulative normalized mass at the nodes
  double log_z_ = 0.0;
};

template <class F>
double LogGridDensity::expect_log_space(F&& f) const {
  static constexpr double kNodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                       0.9061798459386640};
  static constexpr double kWeights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                         0.4786286704993665, 0.2369268850561891};
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < lx_.size(); ++i) {
    const double h = 0.5 * (lx_[i + 1] - lx_[i]), c = 0.5 * (lx_[i + 1] + lx_[i]);
    for (int k = 0; k < 5; ++k) {
      const double l = c + h * kNodes[k];
      const double w = std::exp(log_g_at(l) - log_z_);
      if (w > 0.0) acc += kWeights[k] * h * w * f(l);
    }
  }
  return acc;
}

}  // namespace vbmdd
