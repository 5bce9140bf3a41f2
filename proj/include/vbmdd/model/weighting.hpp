#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vbmdd/model/block_density.hpp"
#include "vbmdd/model/layout.hpp"

namespace vbmdd {

/// A density over the full parameter vector, used as h, g or f by the
/// estimators. log_density returns -inf outside its support.
class WeightingDensity {
 public:
  virtual ~WeightingDensity() = default;
  virtual std::string tag() const = 0;
  virtual double log_density(const Vec& theta) const = 0;
  virtual bool can_sample() const { return false; }
  /// Throws UnsupportedError unless can_sample().
  virtual Vec sample(Rng& rng) const;
};

using WeightingPtr = std::shared_ptr<const WeightingDensity>;

/// Product of independent per-block densities; every block of the layout must
/// be covered exactly once.
class ProductDensity : public WeightingDensity {
 public:
  ProductDensity(std::string tag, ParamLayout layout, std::vector<BlockDensityPtr> factors);

  std::string tag() const override { return tag_; }
  double log_density(const Vec& theta) const override;
  bool can_sample() const override { return true; }
  Vec sample(Rng& rng) const override;

  const ParamLayout& layout() const { return layout_; }
  const BlockDensity& factor(std::size_t block) const { return *factors_.at(block); }
  BlockDensityPtr factor_ptr(std::size_t block) const { return factors_.at(block); }
  double marginal_log_density(std::size_t block, const Vec& values) const {
    return factors_.at(block)->log_pdf(values);
  }

 private:
  std::string tag_;
  ParamLayout layout_;
  std::vector<BlockDensityPtr> factors_;
};

}  // namespace vbmdd
