#pragma once

#include <Eigen/Dense>
#include <string_view>

namespace vbmdd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Cholesky factor of an SPD matrix. A failed first attempt is retried once
/// with 1e-10 * trace / n added to the diagonal; a second failure throws
/// NumericError naming `what`.
class SpdFactor {
 public:
  SpdFactor() = default;
  SpdFactor(const Mat& a, std::string_view what);

  const Mat& lower() const { return lower_; }
  Eigen::Index dim() const { return lower_.rows(); }
  double log_det() const { return log_det_; }
  bool jittered() const { return jittered_; }

  Mat inverse() const;
  Vec solve(const Vec& b) const;
  Mat solve(const Mat& b) const;
  /// Solves L z = x, so z'z = x' A^{-1} x.
  Vec whiten(const Vec& x) const;
  double quad_form_inv(const Vec& x) const { return whiten(x).squaredNorm(); }

 private:
  Mat lower_;
  double log_det_ = 0.0;
  bool jittered_ = false;
};

/// Throws ArgumentError unless `a` is square and symmetric within 1e-12 relative.
void require_symmetric(const Mat& a, std::string_view what);
Mat symmetrize(const Mat& a);

double log_det_spd(const Mat& a, std::string_view what = "matrix");
Mat inverse_spd(const Mat& a, std::string_view what = "matrix");

/// Half-vectorization: lower-triangular entries, column-major.
Vec vech(const Mat& a);
/// Inverse of vech for an n x n symmetric matrix.
Mat unvech(const Eigen::Ref<const Vec>& v, Eigen::Index n);
/// Matrix order n such that n(n+1)/2 == len; throws ArgumentError otherwise.
Eigen::Index vech_order(Eigen::Index len);

}  // namespace vbmdd
