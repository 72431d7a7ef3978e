#include "cfx/explain/metrics.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "cfx/chem/canonical.hpp"
#include "cfx/chem/validity.hpp"

namespace cfx::explain {

namespace {

std::vector<fp::Fingerprint> fingerprints(const std::vector<chem::Molecule>& mols, const fp::FingerprintParams& p) {
  std::vector<fp::Fingerprint> out;
  out.reserve(mols.size());
  for (const auto& m : mols) out.push_back(fp::morgan_fingerprint(m, p));
  return out;
}

double nearest(const fp::Fingerprint& g, const std::vector<fp::Fingerprint>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : set) best = std::min(best, fp::tanimoto_distance(g, c));
  return best;
}

}  // namespace

double coverage(const std::vector<fp::Fingerprint>& set, const std::vector<fp::Fingerprint>& inputs, double delta) {
  if (inputs.empty()) throw ExplainError("coverage over an empty input set");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ExplainError("delta must lie in [0, 1]");
  if (set.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& g : inputs) hit += nearest(g, set) <= delta ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(inputs.size());
}

double coverage(const std::vector<chem::Molecule>& set, const std::vector<chem::Molecule>& inputs, double delta,
                const fp::FingerprintParams& params) {
  return coverage(fingerprints(set, params), fingerprints(inputs, params), delta);
}

double cost(const std::vector<fp::Fingerprint>& set, const std::vector<fp::Fingerprint>& inputs) {
  if (set.empty()) throw ExplainError("cost is undefined for an empty explanation set");
  if (inputs.empty()) throw ExplainError("cost over an empty input set");
  double sum = 0.0;
  for (const auto& g : inputs) sum += nearest(g, set);
  return sum / static_cast<double>(inputs.size());
}

double cost(const std::vector<chem::Molecule>& set, const std::vector<chem::Molecule>& inputs,
            const fp::FingerprintParams& params) {
  return cost(fingerprints(set, params), fingerprints(inputs, params));
}

double combined_score(bool valid, double p, double cov, const ScoreWeights& w) {
  return valid ? w.alpha * p + w.beta * cov : 0.0;
}

Scorer::Scorer(std::vector<chem::Molecule> inputs, const gnn::GnnModel& classifier, int target_class,
               ScoreWeights weights, fp::FingerprintParams fp_params)
    : inputs_(std::move(inputs)),
      classifier_(&classifier),
      target_(target_class),
      weights_(weights),
      fp_params_(fp_params) {
  if (inputs_.empty()) throw ExplainError("scorer needs at least one input molecule");
  if (target_ != 0 && target_ != 1) throw ExplainError("target class must be 0 or 1");
  if (!(weights_.delta >= 0.0 && weights_.delta <= 1.0)) throw ExplainError("delta must lie in [0, 1]");
  input_fps_ = fingerprints(inputs_, fp_params_);
}

CandidateScore Scorer::score(const chem::Molecule& candidate) const {
  CandidateScore s;
  s.mol = candidate;
  s.valid = chem::is_valid(candidate);
  s.covers.assign(inputs_.size(), 0);
  if (!s.valid) return s;
  s.key = chem::canonical_key(candidate);
  const auto probs = classifier_->forward(candidate);
  s.p = probs[static_cast<std::size_t>(target_)];
  s.counterfactual = (probs[1] > probs[0] ? 1 : 0) == target_;
  const auto f = fp::morgan_fingerprint(candidate, fp_params_);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    s.covers[i] = fp::tanimoto_distance(input_fps_[i], f) <= weights_.delta ? 1 : 0;
    hit += static_cast<std::size_t>(s.covers[i]);
  }
  s.cov = static_cast<double>(hit) / static_cast<double>(inputs_.size());
  s.score = combined_score(true, s.p, s.cov, weights_);
  return s;
}

double Scorer::reward(const chem::Molecule& candidate) const {
  if (!chem::is_valid(candidate)) return 0.0;
  const double p = classifier_->predict_prob(candidate, target_);
  const auto f = fp::morgan_fingerprint(candidate, fp_params_);
  std::size_t hit = 0;
  for (const auto& g : input_fps_) hit += fp::tanimoto_distance(g, f) <= weights_.delta ? 1 : 0;
  return combined_score(true, p, static_cast<double>(hit) / static_cast<double>(inputs_.size()), weights_);
}

Selection greedy_topk(const std::vector<CandidateScore>& candidates, std::size_t k, std::size_t input_count,
                      SelectionMode mode, const ScoreWeights& weights) {
  if (k == 0) throw ExplainError("k must be at least 1");
  if (input_count == 0) throw ExplainError("selection over an empty input set");
  for (const auto& c : candidates)
    if (c.covers.size() != input_count) throw ExplainError("candidate coverage vector does not match the inputs");
  Selection sel;
  std::vector<char> taken(candidates.size(), 0), covered(input_count, 0);
  std::set<std::string> keys;
  const double inv = 1.0 / static_cast<double>(input_count);
  while (sel.order.size() < k) {
    std::size_t best = candidates.size();
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      if (taken[i] || (!c.key.empty() && keys.count(c.key))) continue;
      double gain;
      if (mode == SelectionMode::Modular) {
        gain = c.score;
      } else {
        std::size_t fresh = 0;
        for (std::size_t g = 0; g < input_count; ++g) fresh += (c.covers[g] && !covered[g]) ? 1 : 0;
        gain = (c.valid ? weights.alpha * c.p : 0.0) + weights.beta * static_cast<double>(fresh) * inv;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best == candidates.size()) break;
    taken[best] = 1;
    if (!candidates[best].key.empty()) keys.insert(candidates[best].key);
    for (std::size_t g = 0; g < input_count; ++g) covered[g] |= candidates[best].covers[g];
    sel.order.push_back(best);
    sel.gains.push_back(best_gain);
  }
  sel.short_pool = sel.order.size() < k;
  return sel;
}

double set_objective(const std::vector<CandidateScore>& candidates, const std::vector<std::size_t>& chosen,
                     std::size_t input_count, const ScoreWeights& weights) {
  std::vector<char> covered(input_count, 0);
  double total = 0.0;
  for (std::size_t i : chosen) {
    const auto& c = candidates.at(i);
    total += c.valid ? weights.alpha * c.p : 0.0;
    for (std::size_t g = 0; g < input_count; ++g) covered[g] |= c.covers[g];
  }
  std::size_t hit = 0;
  for (char v : covered) hit += static_cast<std::size_t>(v);
  return total + weights.beta * static_cast<double>(hit) / static_cast<double>(input_count);
}

}  // namespace cfx::explain
