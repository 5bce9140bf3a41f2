#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/model/weighting.hpp"

namespace vbmdd {

Vec WeightingDensity::sample(Rng&) const { throw UnsupportedError("weighting density '" + tag() + "' cannot be sampled"); }

ProductDensity::ProductDensity(std::string tag, ParamLayout layout, std::vector<BlockDensityPtr> factors)
    : tag_(std::move(tag)), layout_(std::move(layout)), factors_(std::move(factors)) {
  if (factors_.size() != layout_.blocks().size()) throw ArgumentError("ProductDensity: one factor per block required");
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (!factors_[i]) throw ArgumentError("ProductDensity: null factor");
    if (factors_[i]->dim() != layout_.block(i).size)
      throw ArgumentError("ProductDensity: factor for block '" + layout_.block(i).name + "' has the wrong dimension");
  }
}

double ProductDensity::log_density(const Vec& theta) const {
  if (!layout_.in_support(theta)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 0; i < factors_.size(); ++i) s += factors_[i]->log_pdf(layout_.slice(theta, i));
  return s;
}

Vec ProductDensity::sample(Rng& rng) const {
  Vec theta(layout_.size());
  for (std::size_t i = 0; i < factors_.size(); ++i) layout_.assign(theta, i, factors_[i]->sample(rng));
  return theta;
}

}  // namespace vbmdd
