#include <string>

#include "vbmdd/error.hpp"
#include "vbmdd/model/kernel.hpp"

namespace vbmdd {

void gibbs_sweep(const ModelKernel& model, ChainState& state, Rng& rng, std::size_t first_free) {
  const ParamLayout& layout = model.layout();
  for (std::size_t b = first_free; b < layout.blocks().size(); ++b) {
    BlockDensityPtr cond = model.conditional(b, state);
    layout.assign(state.theta, b, cond->sample(rng));
  }
  if (model.latent_dim() > 0) state.latent = model.sample_latent(state.theta, rng);
}

PosteriorDrawSet run_gibbs(const ModelKernel& model, ChainState init, const ChainConfig& config, std::uint64_t seed,
                           std::size_t first_free) {
  if (config.draws < 1 || config.burn_in < 0 || config.thin < 1) throw ArgumentError("chain config: invalid sizes");
  Rng rng(seed);
  PosteriorDrawSet out;
  out.burn_in = config.burn_in;
  out.thin = config.thin;
  out.seed = seed;
  out.theta.resize(model.layout().size(), config.draws);
  if (model.latent_dim() > 0) {
    out.latent.resize(model.latent_dim(), config.draws);
    if (init.latent.size() != model.latent_dim()) init.latent = model.sample_latent(init.theta, rng);
  }
  ChainState state = std::move(init);
  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.draws) * config.thin;
  int kept = 0;
  for (long it = 0; it < total; ++it) {
    try {
      gibbs_sweep(model, state, rng, first_free);
    } catch (const NumericError& e) {
      throw NumericError(model.name() + " Gibbs iteration " + std::to_string(it) + ": " + e.what());
    }
    if (it >= config.burn_in && (it - config.burn_in) % config.thin == config.thin - 1) {
      out.theta.col(kept) = state.theta;
      if (out.latent.size()) out.latent.col(kept) = state.latent;
      ++kept;
    }
  }
  return out;
}

}  // namespace vbmdd
