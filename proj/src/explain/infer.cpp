#include "cfx/explain/infer.hpp"

#include <set>

#include "cfx/chem/smiles.hpp"

namespace cfx::explain {

nlohmann::json ExplanationReport::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates)
    cands.push_back({{"smiles", c.smiles}, {"key", c.key}, {"score", c.score}, {"p", c.p},
                     {"cov_individual", c.cov}, {"gain", c.gain}});
  nlohmann::json j{{"config", config},     {"seeds", seeds}, {"candidates", cands}, {"coverage", coverage},
                   {"delta", delta},       {"k", k},         {"pool_size", pool_size},
                   {"warnings", warnings}};
  j["cost"] = cost ? nlohmann::json(*cost) : nlohmann::json(nullptr);
  return j;
}

std::vector<CandidateScore> build_pool(const std::vector<chem::Molecule>& mols, const Scorer& scorer,
                                       bool require_counterfactual) {
  std::vector<CandidateScore> pool;
  std::set<std::string> seen;
  for (const auto& m : mols) {
    auto s = scorer.score(m);
    if (!s.valid || (require_counterfactual && !s.counterfactual)) continue;
    if (!seen.insert(s.key).second) continue;
    pool.push_back(std::move(s));
  }
  return pool;
}

ExplanationReport summarize(const std::vector<CandidateScore>& pool, const Scorer& scorer, std::size_t k,
                            SelectionMode mode) {
  ExplanationReport r;
  r.k = k;
  r.delta = scorer.weights().delta;
  r.pool_size = pool.size();
  const auto sel = greedy_topk(pool, k, scorer.inputs().size(), mode, scorer.weights());
  std::vector<fp::Fingerprint> fps;
  for (std::size_t i = 0; i < sel.order.size(); ++i) {
    const auto& c = pool[sel.order[i]];
    r.candidates.push_back({chem::write_smiles(c.mol), c.key, c.score, c.p, c.cov, sel.gains[i]});
    fps.push_back(fp::morgan_fingerprint(c.mol, scorer.fp_params()));
  }
  r.coverage = coverage(fps, scorer.input_fps(), r.delta);
  if (!fps.empty()) r.cost = cost(fps, scorer.input_fps());
  if (pool.empty())
    r.warnings.push_back("no valid counterfactual candidates");
  else if (sel.short_pool)
    r.warnings.push_back("pool holds fewer than k distinct candidates");
  return r;
}

Harvest harvest(const genvae::VaeModel& vae, const adapter::AdapterModel* policy, const Scorer& scorer,
                const InferConfig& config) {
  if (config.steps < 1) throw ExplainError("inference needs at least one step");
  Harvest h;
  const auto& inputs = scorer.inputs();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (scorer.classifier().predict(inputs[i]) == scorer.target_class())
      throw ExplainError("input " + std::to_string(i) + " is already predicted as the target class");
    nk::Rng rng = nk::Rng::stream(config.seed, "infer", i);
    chem::Molecule state = inputs[i];
    bool moved = false;
    for (int t = 0; t < config.steps; ++t) {
      auto step = adapter::chain_step(vae, policy, state, config.decode, rng, config.action);
      ++h.decodes;
      if (!step.decoded.ok) {
        ++h.failures;
        continue;
      }
      state = std::move(step.decoded.mol);
      moved = true;
      if (!config.final_only && scorer.classifier().predict(state) == scorer.target_class())
        h.candidates.push_back(state);
    }
    if (config.final_only && moved && scorer.classifier().predict(state) == scorer.target_class())
      h.candidates.push_back(state);
  }
  return h;
}

ExplanationReport infer(const genvae::VaeModel& vae, const adapter::AdapterModel* policy, const Scorer& scorer,
                        const InferConfig& config) {
  const Harvest h = harvest(vae, policy, scorer, config);
  auto r = summarize(build_pool(h.candidates, scorer), scorer, config.k, config.mode);
  r.seeds["infer"] = config.seed;
  return r;
}

}  // namespace cfx::explain
