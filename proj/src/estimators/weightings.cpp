#include <algorithm>
#include <cmath>
#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/estimators/estimators.hpp"
#include "vbmdd/simd/kernels.hpp"
#include "vbmdd/stats/special.hpp"

namespace vbmdd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

class PriorWeighting final : public WeightingDensity {
 public:
  explicit PriorWeighting(const ModelKernel& m) : model_(m) {}
  std::string tag() const override { return "prior"; }
  double log_density(const Vec& theta) const override {
    return model_.layout().in_support(theta) ? model_.log_prior(theta) : -kInf;
  }
  bool can_sample() const override { return model_.can_sample_prior(); }
  Vec sample(Rng& rng) const override { return model_.sample_prior(rng); }

 private:
  const ModelKernel& model_;
};

class GewekeWeighting final : public WeightingDensity {
 public:
  GewekeWeighting(const ParamLayout& layout, Vec mean, const Mat& cov, double alpha)
      : layout_(layout), mean_(std::move(mean)), chol_(cov, "Geweke weighting covariance"), alpha_(alpha) {
    const auto n = static_cast<int>(mean_.size());
    threshold_ = alpha > 0.0 ? chi_square_quantile(n, 1.0 - alpha) : kInf;
    log_const_ = -0.5 * (n * kLnTwoPi + chol_.log_det()) - std::log1p(-alpha);
  }
  std::string tag() const override { return alpha_ > 0.0 ? "geweke" : "normal"; }
  double log_density(const Vec& theta) const override {
    if (!layout_.in_support(theta)) return -kInf;
    const Vec psi = layout_.to_unconstrained(theta);
    const double d2 = chol_.quad_form_inv(psi - mean_);
    if (d2 > threshold_) return -kInf;
    return log_const_ - 0.5 * d2 - layout_.log_jacobian(psi);
  }
  bool can_sample() const override { return true; }
  Vec sample(Rng& rng) const override {
    Vec z(mean_.size());
    while (true) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
      if (z.squaredNorm() <= threshold_) return layout_.to_constrained(mean_ + chol_.lower() * z);
    }
  }

 private:
  ParamLayout layout_;
  Vec mean_;
  SpdFactor chol_;
  double alpha_, threshold_, log_const_;
};

// Per block: J conditionals, with exponential-family blocks packed feature-major
// for the affine reduction.
struct PmdBlock {
  std::vector<BlockDensityPtr> dists;
  bool packed = false;
  Eigen::Index features = 0;
  std::vector<double> offset, coef;
};

class PmdWeighting final : public WeightingDensity {
 public:
  PmdWeighting(ParamLayout layout, std::vector<PmdBlock> blocks, std::size_t states)
      : layout_(std::move(layout)), blocks_(std::move(blocks)), states_(states),
        log_states_(std::log(static_cast<double>(states))) {}
  std::string tag() const override { return "pmd"; }
  double log_density(const Vec& theta) const override {
    if (!layout_.in_support(theta)) return -kInf;
    std::vector<double> scratch(states_), phi;
    double total = 0.0;
    for (std::size_t m = 0; m < blocks_.size(); ++m) {
      const PmdBlock& b = blocks_[m];
      const Vec x = layout_.slice(theta, m);
      double lse;
      if (b.packed) {
        phi.resize(static_cast<std::size_t>(b.features));
        b.dists.front()->features(x, phi.data());
        lse = simd::affine_log_sum_exp(b.offset.data(), b.coef.data(), states_, phi, states_, scratch.data());
      } else {
        for (std::size_t j = 0; j < states_; ++j) scratch[j] = b.dists[j]->log_pdf(x);
        lse = log_sum_exp(scratch);
      }
      total += lse - log_states_;
    }
    return total;
  }
  bool can_sample() const override { return true; }
  Vec sample(Rng& rng) const override {
    Vec theta(layout_.size());
    for (std::size_t m = 0; m < blocks_.size(); ++m)
      layout_.assign(theta, m, blocks_[m].dists[rng.below(states_)]->sample(rng));
    return theta;
  }

 private:
  ParamLayout layout_;
  std::vector<PmdBlock> blocks_;
  std::size_t states_;
  double log_states_;
};
}  // namespace

WeightingPtr make_vb_weighting(const VBResult& vb) {
  if (!vb.q) throw ArgumentError("VB weighting: result carries no approximation");
  return vb.q;
}

WeightingPtr make_prior_weighting(const ModelKernel& model) { return std::make_shared<PriorWeighting>(model); }

WeightingPtr make_geweke_weighting(const ParamLayout& layout, const PosteriorDrawSet& draws, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ArgumentError("Geweke weighting: alpha must lie in [0, 1)");
  const Eigen::Index n = layout.size(), S = draws.size();
  if (S <= n) throw ArgumentError("Geweke weighting: need more draws than parameters");
  Mat psi(n, S);
  for (Eigen::Index s = 0; s < S; ++s) psi.col(s) = layout.to_unconstrained(draws.draw(s));
  const Vec mean = psi.rowwise().mean();
  const Mat c = psi.colwise() - mean;
  return std::make_shared<GewekeWeighting>(layout, mean, symmetrize(c * c.transpose() / static_cast<double>(S)),
                                           alpha);
}

WeightingPtr make_pmd_weighting(const ModelKernel& model, const PosteriorDrawSet& draws, int states) {
  if (!model.has_conditionals()) throw UnsupportedError(model.name() + ": PMD needs full conditionals");
  if (states < 1) throw ArgumentError("PMD weighting: states must be positive");
  const Eigen::Index S = draws.size();
  if (S < 1) throw ArgumentError("PMD weighting: empty draw set");
  const auto J = static_cast<std::size_t>(std::min<Eigen::Index>(states, S));
  const ParamLayout& layout = model.layout();
  std::vector<PmdBlock> blocks(layout.blocks().size());
  for (auto& b : blocks) b.dists.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto s = static_cast<Eigen::Index>((static_cast<double>(j) + 0.5) * static_cast<double>(S) /
                                             static_cast<double>(J));
    const ChainState st = draws.state(std::min(s, S - 1));
    for (std::size_t m = 0; m < blocks.size(); ++m) blocks[m].dists.push_back(model.conditional(m, st));
  }
  for (auto& b : blocks) {
    b.packed = std::all_of(b.dists.begin(), b.dists.end(), [&](const BlockDensityPtr& d) {
      return d->exponential_family() && d->feature_dim() == b.dists.front()->feature_dim();
    });
    if (!b.packed) continue;
    // Features must also mean the same thing across states; all conditionals of
    // one block share a family, which the equal feature count stands in for.
    b.features = b.dists.front()->feature_dim();
    b.offset.resize(J);
    b.coef.assign(static_cast<std::size_t>(b.features) * J, 0.0);
    std::vector<double> eta(static_cast<std::size_t>(b.features));
    for (std::size_t j = 0; j < J; ++j) {
      b.offset[j] = b.dists[j]->natural(eta.data());
      for (std::size_t k = 0; k < eta.size(); ++k) b.coef[k * J + j] = eta[k];
    }
  }
  return std::make_shared<PmdWeighting>(layout, std::move(blocks), J);
}

}  // namespace vbmdd
