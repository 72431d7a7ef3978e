#pragma once

#include "cfx/adapter/adapter.hpp"
#include "cfx/genvae/vae.hpp"

namespace cfx::adapter {

enum class ActionMode { Sample, Mean };

struct ChainStep {
  genvae::Encoding encoding;
  ActionDist dist;
  std::vector<double> action;
  double log_prob = 0.0;
  genvae::LatentGaussian shifted;
  genvae::DecodeResult decoded;
};

// One pass of the generative chain: encode G, draw a mean shift from the
// policy (zero when `policy` is null), sample z' ~ N(mu + shift, sigma) and
// decode it.
ChainStep chain_step(const genvae::VaeModel& vae, const AdapterModel* policy, const chem::Molecule& state,
                     const genvae::DecodeOptions& decode, nk::Rng& rng, ActionMode mode = ActionMode::Sample);

// Another candidate from an already shifted latent.
genvae::DecodeResult resample(const genvae::VaeModel& vae, const genvae::LatentGaussian& shifted,
                              const genvae::DecodeOptions& decode, nk::Rng& rng);

}  // namespace cfx::adapter
