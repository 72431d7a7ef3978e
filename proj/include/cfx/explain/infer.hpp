#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfx/adapter/chain.hpp"
#include "cfx/explain/metrics.hpp"
#include "json.hpp"

namespace cfx::explain {

struct ReportEntry {
  std::string smiles;
  std::string key;
  double score = 0.0;
  double p = 0.0;
  double cov = 0.0;
  double gain = 0.0;
};

struct ExplanationReport {
  std::vector<ReportEntry> candidates;  // selection order
  double coverage = 0.0;
  std::optional<double> cost;           // empty when nothing was selected
  double delta = 0.0;
  std::size_t k = 0;
  std::size_t pool_size = 0;
  std::vector<std::string> warnings;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Valid counterfactual candidates, deduplicated by canonical key in
// first-seen order. With `require_counterfactual` off only validity is
// enforced.
std::vector<CandidateScore> build_pool(const std::vector<chem::Molecule>& mols, const Scorer& scorer,
                                       bool require_counterfactual = true);

// Greedy top-k over a pool plus coverage and cost of the selection against
// the scorer's inputs.
ExplanationReport summarize(const std::vector<CandidateScore>& pool, const Scorer& scorer, std::size_t k,
                            SelectionMode mode = SelectionMode::SetCoverage);

struct InferConfig {
  int steps = 20;  // T per input molecule
  std::size_t k = 10;
  bool final_only = false;  // keep only the chain's last state
  adapter::ActionMode action = adapter::ActionMode::Sample;
  genvae::DecodeOptions decode{};
  SelectionMode mode = SelectionMode::SetCoverage;
  std::uint64_t seed = 0;
};

struct Harvest {
  std::vector<chem::Molecule> candidates;  // valid counterfactuals in discovery order
  std::size_t decodes = 0;
  std::size_t failures = 0;
};

// Runs the T-step encode -> shift -> sample -> decode chain from every input.
// Each input draws from its own stream, so results do not depend on order.
// Throws if an input is already predicted as the target class.
Harvest harvest(const genvae::VaeModel& vae, const adapter::AdapterModel* policy, const Scorer& scorer,
                const InferConfig& config);

ExplanationReport infer(const genvae::VaeModel& vae, const adapter::AdapterModel* policy, const Scorer& scorer,
                        const InferConfig& config);

}  // namespace cfx::explain
