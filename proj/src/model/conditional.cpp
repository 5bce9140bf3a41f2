#include <algorithm>
#include <cmath>
#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/model/block_density.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void BlockDensity::features(const Vec&, double*) const {
  throw UnsupportedError("density has no exponential-family form");
}

double BlockDensity::natural(double*) const { throw UnsupportedError("density has no exponential-family form"); }

NormalBlock::NormalBlock(Vec mean, const Mat& covariance) : dist_(std::move(mean), covariance) {
  precision_ = symmetrize(dist_.factor().inverse());
}

std::shared_ptr<NormalBlock> NormalBlock::from_precision(const Vec& mean, const Mat& precision) {
  const Mat cov = inverse_spd(precision, "normal block precision");
  auto nb = std::make_shared<NormalBlock>(mean, cov);
  nb->precision_ = symmetrize(precision);
  return nb;
}

Eigen::Index NormalBlock::feature_dim() const {
  const Eigen::Index d = dim();
  return d + d * (d + 1) / 2;
}

void NormalBlock::features(const Vec& x, double* out) const {
  const Eigen::Index d = dim();
  for (Eigen::Index i = 0; i < d; ++i) out[i] = x(i);
  Eigen::Index k = d;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j; i < d; ++i) out[k++] = x(i) * x(j);
}

double NormalBlock::natural(double* eta) const {
  const Eigen::Index d = dim();
  const Vec lm = precision_ * dist_.mean();
  for (Eigen::Index i = 0; i < d; ++i) eta[i] = lm(i);
  Eigen::Index k = d;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j; i < d; ++i) eta[k++] = (i == j ? -0.5 : -1.0) * precision_(i, j);
  return -0.5 * dist_.mean().dot(lm) - 0.5 * dist_.factor().log_det() - 0.5 * static_cast<double>(d) * kLnTwoPi;
}

WishartBlock::WishartBlock(const Mat& scale_inverse, double dof) : dist_(scale_inverse, dof) {}

Eigen::Index WishartBlock::dim() const {
  const Eigen::Index n = dist_.dim();
  return n * (n + 1) / 2;
}

double WishartBlock::log_pdf(const Vec& x) const { return dist_.log_pdf(unvech(x, dist_.dim())); }

Vec WishartBlock::sample(Rng& rng) const { return vech(dist_.sample(rng)); }

void WishartBlock::features(const Vec& x, double* out) const {
  const Eigen::Index n = dist_.dim();
  Eigen::LLT<Mat> llt(unvech(x, n));
  if (llt.info() != Eigen::Success) throw DomainError("Wishart features: matrix is not positive definite");
  out[0] = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i, ++k) out[1 + k] = (i == j ? 1.0 : 2.0) * x(k);
}

double WishartBlock::natural(double* eta) const {
  const Eigen::Index n = dist_.dim();
  eta[0] = 0.5 * (dist_.params().dof - static_cast<double>(n) - 1.0);
  const Vec s = vech(dist_.params().scale_inverse);
  for (Eigen::Index k = 0; k < s.size(); ++k) eta[1 + k] = -0.5 * s(k);
  return dist_.log_norm();
}

GammaBlock::GammaBlock(Vec shape, Vec rate) : shape_(std::move(shape)), rate_(std::move(rate)) {
  if (shape_.size() != rate_.size() || shape_.size() == 0) throw ArgumentError("GammaBlock: shape/rate length mismatch");
  if (!(shape_.array() > 0.0).all() || !(rate_.array() > 0.0).all())
    throw ModelConfigError("GammaBlock: shape and rate must be positive");
}

double GammaBlock::log_pdf(const Vec& x) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < dim(); ++i) s += GammaDist(shape_(i), rate_(i)).log_pdf(x(i));
  return s;
}

Vec GammaBlock::sample(Rng& rng) const {
  Vec x(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) x(i) = sample_standard_gamma(shape_(i), rng) / rate_(i);
  return x;
}

void GammaBlock::features(const Vec& x, double* out) const {
  for (Eigen::Index i = 0; i < dim(); ++i) {
    out[2 * i] = std::log(x(i));
    out[2 * i + 1] = x(i);
  }
}

double GammaBlock::natural(double* eta) const {
  double c = 0.0;
  for (Eigen::Index i = 0; i < dim(); ++i) {
    eta[2 * i] = shape_(i) - 1.0;
    eta[2 * i + 1] = -rate_(i);
    c += shape_(i) * std::log(rate_(i)) - std::lgamma(shape_(i));
  }
  return c;
}

TruncNormalBlock::TruncNormalBlock(Vec location, Vec scale) {
  if (location.size() != scale.size()) throw ArgumentError("TruncNormalBlock: length mismatch");
  for (Eigen::Index i = 0; i < location.size(); ++i) parts_.emplace_back(location(i), scale(i));
}

double TruncNormalBlock::log_pdf(const Vec& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < parts_.size(); ++i) s += parts_[i].log_pdf(x(static_cast<Eigen::Index>(i)));
  return s;
}

Vec TruncNormalBlock::sample(Rng& rng) const {
  Vec x(dim());
  for (std::size_t i = 0; i < parts_.size(); ++i) x(static_cast<Eigen::Index>(i)) = parts_[i].sample(rng);
  return x;
}

void TruncNormalBlock::features(const Vec& x, double* out) const {
  for (Eigen::Index i = 0; i < dim(); ++i) {
    out[2 * i] = x(i);
    out[2 * i + 1] = x(i) * x(i);
  }
}

double TruncNormalBlock::natural(double* eta) const {
  double c = 0.0;
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const double m = parts_[i].location(), s = parts_[i].scale();
    const double prec = 1.0 / (s * s);
    eta[2 * i] = m * prec;
    eta[2 * i + 1] = -0.5 * prec;
    c += -0.5 * m * m * prec - 0.5 * kLnTwoPi - std::log(s) - log_normal_cdf(m / s);
  }
  return c;
}

LogGridDensity::LogGridDensity(std::vector<double> log_x, std::vector<double> log_g)
    : lx_(std::move(log_x)), lg_(std::move(log_g)) {
  if (lx_.size() < 2 || lx_.size() != lg_.size()) throw ArgumentError("LogGridDensity: need matching grids of >= 2 nodes");
  for (std::size_t i = 0; i + 1 < lx_.size(); ++i)
    if (!(lx_[i + 1] > lx_[i])) throw ArgumentError("LogGridDensity: grid must be strictly increasing");
  for (double v : lg_)
    if (std::isnan(v) || v == kInf) throw NumericError("LogGridDensity: log density is NaN or +inf on the grid");
  // Work relative to the peak: node values far from zero would lose digits in log_g - log_z.
  const double peak = *std::max_element(lg_.begin(), lg_.end());
  if (std::isfinite(peak))
    for (double& v : lg_) v -= peak;
  std::vector<double> log_mass(lx_.size() - 1);
  for (std::size_t i = 0; i + 1 < lx_.size(); ++i) {
    const double v0 = lg_[i], v1 = lg_[i + 1];
    const double m = std::max(v0, v1);
    if (m == -kInf) {
      log_mass[i] = -kInf;
      continue;
    }
    const double z = std::abs(v1 - v0);
    const double shape = (z == kInf) ? 0.0 : (z < 1e-12 ? 1.0 : -std::expm1(-z) / z);
    log_mass[i] = shape > 0.0 ? m + std::log(lx_[i + 1] - lx_[i]) + std::log(shape) : -kInf;
  }
  log_z_ = log_sum_exp(log_mass);
  if (!std::isfinite(log_z_)) throw NumericError("LogGridDensity: density has no mass on the grid");
  cum_.assign(lx_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < lx_.size(); ++i) cum_[i + 1] = cum_[i] + std::exp(log_mass[i] - log_z_);
}

double LogGridDensity::log_g_at(double l) const {
  if (l < lx_.front() || l > lx_.back()) return -kInf;
  auto it = std::upper_bound(lx_.begin(), lx_.end(), l);
  std::size_t i = it == lx_.begin() ? 0 : static_cast<std::size_t>(it - lx_.begin()) - 1;
  if (i + 1 >= lx_.size()) i = lx_.size() - 2;
  const double w = (l - lx_[i]) / (lx_[i + 1] - lx_[i]);
  if (lg_[i] == -kInf || lg_[i + 1] == -kInf) return (w == 0.0) ? lg_[i] : (w == 1.0 ? lg_[i + 1] : -kInf);
  return lg_[i] + w * (lg_[i + 1] - lg_[i]);
}

double LogGridDensity::log_pdf_scalar(double x) const {
  if (!(x > 0.0)) return -kInf;
  const double l = std::log(x);
  return log_g_at(l) - log_z_ - l;
}

Vec LogGridDensity::sample(Rng& rng) const {
  const double u = rng.uniform() * cum_.back();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  std::size_t i = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  if (i + 1 >= lx_.size()) i = lx_.size() - 2;
  const double h = lx_[i + 1] - lx_[i];
  const double b = (lg_[i + 1] - lg_[i]) / h;
  const double v = rng.uniform();
  double s;
  if (!std::isfinite(b) || std::abs(b * h) < 1e-12)
    s = v * h;
  else if (b > 0.0)
    s = h + std::log(v + (1.0 - v) * std::exp(-b * h)) / b;
  else
    s = std::log1p(v * std::expm1(b * h)) / b;
  return Vec::Constant(1, std::exp(lx_[i] + std::clamp(s, 0.0, h)));
}

double LogGridDensity::mean() const {
  return expect_log_space([](double l) { return std::exp(l); });
}

double LogGridDensity::mean_log() const {
  return expect_log_space([](double l) { return l; });
}

double LogGridDensity::mean_inverse() const {
  return expect_log_space([](double l) { return std::exp(-l); });
}

double LogGridDensity::entropy() const {
  return -expect_log_space([this](double l) { return log_g_at(l) - log_z_ - l; });
}

double LogGridDensity::edge_mass(int cells) const {
  const std::size_t n = cum_.size();
  const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(cells), n - 1);
  return cum_[c] + (cum_.back() - cum_[n - 1 - c]);
}

}  // namespace vbmdd
