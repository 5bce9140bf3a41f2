#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace vbmdd {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
/// Stable 64-bit hash of a label (FNV-1a followed by mix64).
std::uint64_t hash_label(std::string_view label);

/// Seedable generator with platform-independent uniform, normal and
/// exponential variates. Not thread safe; use one instance per worker.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Child stream from a base seed and a path of stream identifiers.
  static Rng stream(std::uint64_t base, std::initializer_list<std::uint64_t> path);
  static std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential() { return -std::log(uniform()); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace vbmdd
