#include "cfx/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "cfx/chem/validity.hpp"

namespace cfx::baselines {

namespace {

bool is_cf(const explain::Scorer& scorer, const chem::Molecule& m) {
  return scorer.classifier().predict(m) == scorer.target_class();
}

}  // namespace

BaselineResult sample_baseline(const genvae::VaeModel& vae, const explain::Scorer& scorer, int steps,
                               const genvae::DecodeOptions& decode, std::uint64_t seed) {
  BaselineResult r;
  const auto& inputs = scorer.inputs();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nk::Rng rng = nk::Rng::stream(seed, "baseline.sample", i);
    const auto enc = vae.encode(inputs[i]);
    for (int t = 0; t < steps; ++t) {
      auto d = vae.decode(genvae::sample_latent(enc.latent, rng), decode, rng);
      ++r.evaluations;
      if (!d.ok) continue;
      const bool cf = is_cf(scorer, d.mol);
      r.pool.push_back(std::move(d.mol));
      if (cf) break;
    }
  }
  return r;
}

double SaSchedule::at(int completed) const {
  if (!(initial > 0.0) || period < 1) throw std::invalid_argument("SA schedule needs a positive temperature and period");
  return initial * std::pow(0.5, completed / period);
}

double metropolis_acceptance(double delta, double temperature) {
  if (delta >= 0.0) return 1.0;
  return std::exp(delta / temperature);
}

BaselineResult sa_baseline(const genvae::VaeModel& vae, const explain::Scorer& scorer, const SaConfig& config,
                           std::uint64_t seed) {
  BaselineResult r;
  const auto& inputs = scorer.inputs();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nk::Rng rng = nk::Rng::stream(seed, "baseline.sa", i);
    chem::Molecule current = inputs[i];
    double current_score = scorer.reward(current);
    const auto input_enc = vae.encode(inputs[i]);
    for (int t = 0; t < config.steps; ++t) {
      const genvae::LatentGaussian latent = config.propose_from_input ? input_enc.latent : vae.encode(current).latent;
      auto d = vae.decode(genvae::sample_latent(latent, rng), config.decode, rng);
      ++r.evaluations;
      const double s = d.ok ? scorer.reward(d.mol) : 0.0;
      const double temp = config.schedule.at(t);
      if (d.ok) {
        r.pool.push_back(d.mol);
        if (rng.uniform() < metropolis_acceptance(s - current_score, temp)) {
          current = std::move(d.mol);
          current_score = s;
        }
      }
      r.chain_scores.push_back(current_score);
    }
  }
  return r;
}

std::vector<chem::Molecule> legal_edits(const chem::Molecule& mol, const chem::ElementSet& elements) {
  std::vector<chem::Molecule> out;
  auto keep = [&](chem::Molecule&& m) {
    if (!m.empty() && chem::is_valid(m)) out.push_back(std::move(m));
  };
  const int n = static_cast<int>(mol.atom_count());
  for (int a = 0; a < n; ++a)
    for (int e : elements.elements()) {
      chem::Molecule m = mol;
      int b = m.add_atom(e);
      m.add_bond(a, b, 1);
      keep(std::move(m));
    }
  if (n > 1)
    for (int a = 0; a < n; ++a)
      if (mol.degree(a) == 1) {
        chem::Molecule m = mol;
        m.remove_atom(a);
        keep(std::move(m));
      }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const int order = mol.bond_order(a, b);
      if (order == 0) {
        chem::Molecule m = mol;
        m.add_bond(a, b, 1);
        keep(std::move(m));
        continue;
      }
      for (int o = 1; o <= 3; ++o) {
        if (o == order) continue;
        chem::Molecule m = mol;
        m.set_bond_order(a, b, o);
        keep(std::move(m));
      }
      chem::Molecule m = mol;
      m.remove_bond(a, b);
      keep(std::move(m));
    }
  return out;
}

BaselineResult walk_baseline(const explain::Scorer& scorer, const chem::ElementSet& elements, int steps,
                             std::uint64_t seed) {
  BaselineResult r;
  const auto& inputs = scorer.inputs();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nk::Rng rng = nk::Rng::stream(seed, "baseline.walk", i);
    chem::Molecule current = inputs[i];
    for (int t = 0; t < steps; ++t) {
      auto edits = legal_edits(current, elements);
      if (edits.empty()) break;
      current = std::move(edits[rng.below(edits.size())]);
      ++r.evaluations;
      if (is_cf(scorer, current)) r.pool.push_back(current);
    }
  }
  return r;
}

}  // namespace cfx::baselines
