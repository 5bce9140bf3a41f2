#include <limits>

#include "vbmdd/error.hpp"
#include "vbmdd/model/kernel.hpp"

namespace vbmdd {

double ModelKernel::log_kernel(const Vec& theta) const {
  if (!layout().in_support(theta)) return -std::numeric_limits<double>::infinity();
  const double lp = log_prior(theta);
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  return lp + log_likelihood(theta);
}

Vec ModelKernel::sample_prior(Rng&) const { throw UnsupportedError(name() + ": prior sampling not available"); }

BlockDensityPtr ModelKernel::conditional(std::size_t, const ChainState&) const {
  throw UnsupportedError(name() + ": full conditionals not available");
}

Vec ModelKernel::sample_latent(const Vec&, Rng&) const { return Vec(); }

ChainState ModelKernel::initial_state() const { throw UnsupportedError(name() + ": no chain starting point"); }

PosteriorDrawSet ModelKernel::sample_posterior(const ChainConfig& config, std::uint64_t seed) const {
  if (!has_conditionals()) throw UnsupportedError(name() + ": no posterior sampler");
  return run_gibbs(*this, initial_state(), config, seed);
}

VBResult ModelKernel::fit_vb(const VbConfig&) const { throw UnsupportedError(name() + ": no variational fit"); }

}  // namespace vbmdd
