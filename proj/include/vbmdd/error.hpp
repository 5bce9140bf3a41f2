#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace vbmdd {

/// Precondition violated by the caller (empty input, bad probability, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument lies outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical routine failed (Cholesky, quadrature, root finding).
/// `achieved` carries the best value reached when one exists.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::optional<double> achieved = std::nullopt)
      : std::runtime_error(what), achieved_(achieved) {}
  std::optional<double> achieved() const { return achieved_; }

 private:
  std::optional<double> achieved_;
};

/// Model hyper-parameters are inconsistent (e.g. Wishart dof too small).
class ModelConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An estimator could not produce a value (weighting disjoint from the chain, ...).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The model does not expose a capability the caller needs.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace vbmdd
