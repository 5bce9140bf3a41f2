#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "vbmdd/diagnostics.hpp"
#include "vbmdd/error.hpp"
#include "vbmdd/stats/rng.hpp"

using namespace vbmdd;

namespace {
std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (auto& e : x) {
    v = phi * v + rng.normal();
    e = v;
  }
  return x;
}
}  // namespace

TEST_CASE("nse") {
  CHECK(nse(std::vector<double>{1, 1, 1}) == 0.0);
  CHECK(nse(std::vector<double>{0, 2}) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(nse(std::vector<double>{1.0}), ArgumentError);
  const auto x = ar1(0.0, 100, 5);
  const double s = nse(x);
  CHECK(s > 0.8);
  CHECK(s < 1.2);
  std::vector<double> y = x;
  for (auto& v : y) v = 3.0 * v + 10.0;
  CHECK(nse(y) == doctest::Approx(3.0 * s).epsilon(1e-12));
}

TEST_CASE("batch means") {
  CHECK(batch_means_se(std::vector<double>(60, 2.0), 30) == 0.0);
  CHECK_THROWS_AS(batch_means_se(std::vector<double>(61, 2.0), 30), ArgumentError);
  const auto iid = ar1(0.0, 30000, 6);
  CHECK(batch_means_se(iid, 30) == doctest::Approx(1.0 / std::sqrt(30000.0)).epsilon(0.3));
  const auto cor = ar1(0.9, 30000, 7);
  const double ratio = batch_means_se(cor, 30) / (nse(cor) / std::sqrt(30000.0));
  CHECK(ratio == doctest::Approx(std::sqrt(19.0)).epsilon(0.4));
  const auto small = ar1(0.3, 50, 8);
  CHECK(batch_means_se(small, 50) == doctest::Approx(nse(small) / std::sqrt(50.0)).epsilon(1e-12));
}

TEST_CASE("spectral density at zero") {
  CHECK(spectral_density_zero(ar1(0.0, 20000, 9)) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(spectral_density_zero(ar1(0.5, 20000, 10)) == doctest::Approx(3.0).epsilon(0.25));
  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
  CHECK(spectral_density_zero(alt) < 0.1);
  CHECK(spectral_density_zero(alt) >= 0.0);
  CHECK_THROWS_AS(spectral_density_zero(std::vector<double>(200, 1.0)), NumericError);
  CHECK_THROWS_AS(spectral_density_zero(std::vector<double>(50, 1.0)), ArgumentError);
}

TEST_CASE("percent in bounds") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(percent_in_bounds(std::vector<double>{1, 2, 3}, {0.0, inf}) == 100.0);
  CHECK(percent_in_bounds(std::vector<double>{1, 2, 3}, {2.0, inf}) == doctest::Approx(66.6667).epsilon(1e-5));
  CHECK(percent_in_bounds(std::vector<double>{2908.2 - 1e-9, 2908.2, 2910.0, 2912.4}, {2908.2, 2912.3}) == 50.0);
  CHECK_THROWS_AS(percent_in_bounds(std::vector<double>{1.0}, {2.0, 1.0}), ArgumentError);
}
