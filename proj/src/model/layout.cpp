#include "vbmdd/model/layout.hpp"

#include <cmath>

#include "vbmdd/error.hpp"

namespace vbmdd {

ParamLayout& ParamLayout::add(std::string name, Support s, Eigen::Index size, Eigen::Index order) {
  if (size < 1) throw ArgumentError("layout: block '" + name + "' must be nonempty");
  for (const Block& b : blocks_)
    if (b.name == name) throw ArgumentError("layout: duplicate block '" + name + "'");
  blocks_.push_back(Block{std::move(name), s, size_, size, order});
  size_ += size;
  return *this;
}

ParamLayout& ParamLayout::add_real(std::string name, Eigen::Index size) {
  return add(std::move(name), Support::Real, size, 0);
}

ParamLayout& ParamLayout::add_positive(std::string name, Eigen::Index size) {
  return add(std::move(name), Support::Positive, size, 0);
}

ParamLayout& ParamLayout::add_spd(std::string name, Eigen::Index order) {
  return add(std::move(name), Support::Spd, order * (order + 1) / 2, order);
}

std::size_t ParamLayout::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  throw ArgumentError("layout: no block named '" + name + "'");
}

Vec ParamLayout::slice(const Vec& theta, std::size_t block) const {
  const Block& b = blocks_.at(block);
  return theta.segment(b.offset, b.size);
}

void ParamLayout::assign(Vec& theta, std::size_t block, const Vec& values) const {
  const Block& b = blocks_.at(block);
  if (values.size() != b.size) throw ArgumentError("layout: wrong length for block '" + b.name + "'");
  theta.segment(b.offset, b.size) = values;
}

Mat ParamLayout::matrix(const Vec& theta, std::size_t block) const {
  const Block& b = blocks_.at(block);
  if (b.support != Support::Spd) throw ArgumentError("layout: block '" + b.name + "' is not a matrix block");
  return unvech(theta.segment(b.offset, b.size), b.order);
}

bool ParamLayout::in_support(const Vec& theta) const {
  if (theta.size() != size_) return false;
  for (const Block& b : blocks_) {
    auto seg = theta.segment(b.offset, b.size);
    if (!seg.allFinite()) return false;
    if (b.support == Support::Positive && !(seg.array() > 0.0).all()) return false;
    if (b.support == Support::Spd) {
      Eigen::LLT<Mat> llt(unvech(seg, b.order));
      if (llt.info() != Eigen::Success) return false;
    }
  }
  return true;
}

Vec ParamLayout::to_unconstrained(const Vec& theta) const {
  if (theta.size() != size_) throw ArgumentError("layout: parameter vector has the wrong length");
  Vec psi(size_);
  for (const Block& b : blocks_) {
    auto seg = theta.segment(b.offset, b.size);
    switch (b.support) {
      case Support::Real:
        psi.segment(b.offset, b.size) = seg;
        break;
      case Support::Positive:
        psi.segment(b.offset, b.size) = seg.array().log();
        break;
      case Support::Spd: {
        Eigen::LLT<Mat> llt(unvech(seg, b.order));
        if (llt.info() != Eigen::Success) throw DomainError("layout: block '" + b.name + "' is not positive definite");
        Mat l = llt.matrixL();
        for (Eigen::Index i = 0; i < b.order; ++i) l(i, i) = std::log(l(i, i));
        psi.segment(b.offset, b.size) = vech(l);
        break;
      }
    }
  }
  return psi;
}

Vec ParamLayout::to_constrained(const Vec& psi) const {
  if (psi.size() != size_) throw ArgumentError("layout: parameter vector has the wrong length");
  Vec theta(size_);
  for (const Block& b : blocks_) {
    auto seg = psi.segment(b.offset, b.size);
    switch (b.support) {
      case Support::Real:
        theta.segment(b.offset, b.size) = seg;
        break;
      case Support::Positive:
        theta.segment(b.offset, b.size) = seg.array().exp();
        break;
      case Support::Spd: {
        Mat l = unvech(seg, b.order).triangularView<Eigen::Lower>();
        for (Eigen::Index i = 0; i < b.order; ++i) l(i, i) = std::exp(l(i, i));
        theta.segment(b.offset, b.size) = vech(l * l.transpose());
        break;
      }
    }
  }
  return theta;
}

double ParamLayout::log_jacobian(const Vec& psi) const {
  double lj = 0.0;
  for (const Block& b : blocks_) {
    auto seg = psi.segment(b.offset, b.size);
    if (b.support == Support::Positive) lj += seg.sum();
    if (b.support == Support::Spd) {
      // P = L L' has Jacobian 2^m prod L_ii^(m-i+1) (i from 1); the log diagonal adds prod L_ii.
      const Eigen::Index m = b.order;
      lj += static_cast<double>(m) * std::log(2.0);
      Eigen::Index k = 0;
      for (Eigen::Index j = 0; j < m; ++j) {
        lj += static_cast<double>(m - j + 1) * seg(k);  // seg(k) = ln L_jj, j zero-based
        k += m - j;
      }
    }
  }
  return lj;
}

}  // namespace vbmdd
