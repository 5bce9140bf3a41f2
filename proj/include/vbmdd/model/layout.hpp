#pragma once

#include <string>
#include <vector>

#include "vbmdd/stats/linalg.hpp"

namespace vbmdd {

enum class Support { Real, Positive, Spd };

struct Block {
  std::string name;
  Support support = Support::Real;
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  /// Matrix order for SPD blocks (stored as vech, size = order(order+1)/2).
  Eigen::Index order = 0;
};

/// Names the blocks of a flat parameter vector and maps it to an unconstrained
/// space: log for positive entries, Cholesky factor with log diagonal for SPD
/// blocks.
class ParamLayout {
 public:
  ParamLayout& add_real(std::string name, Eigen::Index size);
  ParamLayout& add_positive(std::string name, Eigen::Index size);
  ParamLayout& add_spd(std::string name, Eigen::Index order);

  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& block(std::size_t i) const { return blocks_.at(i); }
  /// Throws ArgumentError for an unknown name.
  std::size_t index_of(const std::string& name) const;
  Eigen::Index size() const { return size_; }

  Vec slice(const Vec& theta, std::size_t block) const;
  void assign(Vec& theta, std::size_t block, const Vec& values) const;
  /// The SPD block as a full matrix.
  Mat matrix(const Vec& theta, std::size_t block) const;

  /// Positive entries > 0 and SPD blocks positive definite.
  bool in_support(const Vec& theta) const;

  Vec to_unconstrained(const Vec& theta) const;
  Vec to_constrained(const Vec& psi) const;
  /// ln |d theta / d psi| at psi.
  double log_jacobian(const Vec& psi) const;

 private:
  ParamLayout& add(std::string name, Support s, Eigen::Index size, Eigen::Index order);
  std::vector<Block> blocks_;
  Eigen::Index size_ = 0;
};

}  // namespace vbmdd
