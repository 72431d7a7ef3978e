#pragma once

#include <cstdint>
#include <vector>

#include "cfx/chem/featurize.hpp"
#include "cfx/explain/metrics.hpp"
#include "cfx/genvae/vae.hpp"

namespace cfx::baselines {

// Candidate molecules in discovery order; counterfactual filtering happens in
// explain::build_pool so every method shares one selection path.
struct BaselineResult {
  std::vector<chem::Molecule> pool;
  std::size_t evaluations = 0;  // decodes or edits performed
  std::vector<double> chain_scores;  // SA only: score of the current state after each step
};

// Per input: resample z from encode(G) and decode, up to `steps` times,
// stopping at the first valid counterfactual.
BaselineResult sample_baseline(const genvae::VaeModel& vae, const explain::Scorer& scorer, int steps,
                               const genvae::DecodeOptions& decode, std::uint64_t seed);

struct SaSchedule {
  double initial = 0.1;
  int period = 10;
  // Temperature after `completed` steps.
  double at(int completed) const;
};

// min(1, exp(delta / temperature)).
double metropolis_acceptance(double delta, double temperature);

struct SaConfig {
  int steps = 20;
  SaSchedule schedule{};
  bool propose_from_input = false;  // literal mode: always resample around the input
  genvae::DecodeOptions decode{};
};

// Metropolis search over decoded proposals scored by the explanation score.
// Every valid proposal enters the pool; acceptance only moves the chain.
BaselineResult sa_baseline(const genvae::VaeModel& vae, const explain::Scorer& scorer, const SaConfig& config,
                           std::uint64_t seed);

// Every molecule one edit away that passes the validity check: add an atom
// with a single bond, delete a degree-1 atom, change a bond order, add or
// remove a bond. Never empties the molecule.
std::vector<chem::Molecule> legal_edits(const chem::Molecule& mol, const chem::ElementSet& elements);

// Uniform random-edit walk of at most `steps` edits per input; visited
// molecules predicted as the target class form the pool.
BaselineResult walk_baseline(const explain::Scorer& scorer, const chem::ElementSet& elements, int steps,
                             std::uint64_t seed);

}  // namespace cfx::baselines
