#include "cfx/adapter/chain.hpp"

namespace cfx::adapter {

ChainStep chain_step(const genvae::VaeModel& vae, const AdapterModel* policy, const chem::Molecule& state,
                     const genvae::DecodeOptions& decode, nk::Rng& rng, ActionMode mode) {
  ChainStep s;
  s.encoding = vae.encode(state);
  const std::size_t dz = s.encoding.latent.mu.size();
  if (policy) {
    if (policy->config().latent != dz) throw AdapterError("adapter latent width does not match the generator");
    s.dist = policy->policy_dist(s.encoding.h_graph);
    s.action = mode == ActionMode::Sample ? sample_action(s.dist, rng) : s.dist.mean;
    s.log_prob = log_prob(s.dist, s.action);
  } else {
    s.dist = {std::vector<double>(dz, 0.0), std::vector<double>(dz, 0.0)};
    s.action.assign(dz, 0.0);
  }
  s.shifted = shifted_latent(s.encoding.latent, s.action);
  s.decoded = resample(vae, s.shifted, decode, rng);
  return s;
}

genvae::DecodeResult resample(const genvae::VaeModel& vae, const genvae::LatentGaussian& shifted,
                              const genvae::DecodeOptions& decode, nk::Rng& rng) {
  return vae.decode(genvae::sample_latent(shifted, rng), decode, rng);
}

}  // namespace cfx::adapter
