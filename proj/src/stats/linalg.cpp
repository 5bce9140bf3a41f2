#include "vbmdd/stats/linalg.hpp"

#include <cmath>
#include <string>

#include "vbmdd/error.hpp"

namespace vbmdd {

namespace {

bool try_cholesky(const Mat& a, Mat& lower) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Eigen::Index i = 0; i < lower.rows(); ++i)
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  return true;
}

}  // namespace

SpdFactor::SpdFactor(const Mat& a, std::string_view what) {
  if (a.rows() != a.cols()) throw ArgumentError(std::string(what) + ": matrix is not square");
  if (!a.allFinite()) throw NumericError(std::string(what) + ": matrix has non-finite entries");
  if (!try_cholesky(a, lower_)) {
    const double n = static_cast<double>(a.rows());
    const double jitter = 1e-10 * std::abs(a.trace()) / (n > 0 ? n : 1.0);
    Mat b = a;
    b.diagonal().array() += jitter;
    if (!try_cholesky(b, lower_))
      throw NumericError(std::string(what) + ": Cholesky factorization failed (matrix not positive definite)");
    jittered_ = true;
  }
  log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

Mat SpdFactor::inverse() const {
  const Eigen::Index n = lower_.rows();
  Mat linv = lower_.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
  return linv.transpose() * linv;
}

Vec SpdFactor::solve(const Vec& b) const {
  Vec z = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Mat SpdFactor::solve(const Mat& b) const {
  Mat z = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Vec SpdFactor::whiten(const Vec& x) const { return lower_.triangularView<Eigen::Lower>().solve(x); }

void require_symmetric(const Mat& a, std::string_view what) {
  if (a.rows() != a.cols()) throw ArgumentError(std::string(what) + ": matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ArgumentError(std::string(what) + ": matrix is not symmetric");
}

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

double log_det_spd(const Mat& a, std::string_view what) { return SpdFactor(a, what).log_det(); }

Mat inverse_spd(const Mat& a, std::string_view what) { return symmetrize(SpdFactor(a, what).inverse()); }

Vec vech(const Mat& a) {
  const Eigen::Index n = a.rows();
  Vec v(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) v(k++) = a(i, j);
  return v;
}

Mat unvech(const Eigen::Ref<const Vec>& v, Eigen::Index n) {
  if (v.size() != n * (n + 1) / 2) throw ArgumentError("unvech: length does not match matrix order");
  Mat a(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      a(i, j) = v(k);
      a(j, i) = v(k);
      ++k;
    }
  return a;
}

Eigen::Index vech_order(Eigen::Index len) {
  Eigen::Index n = 0;
  while (n * (n + 1) / 2 < len) ++n;
  if (n * (n + 1) / 2 != len) throw ArgumentError("vech length is not triangular");
  return n;
}

}  // namespace vbmdd
