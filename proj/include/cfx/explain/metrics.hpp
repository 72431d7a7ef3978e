#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/chem/molecule.hpp"
#include "cfx/fp/fingerprint.hpp"
#include "cfx/gnn/gnn.hpp"

namespace cfx::explain {

class ExplainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fraction of inputs whose nearest member of `set` lies within delta.
// Empty set -> 0; empty inputs -> error.
double coverage(const std::vector<fp::Fingerprint>& set, const std::vector<fp::Fingerprint>& inputs, double delta);
double coverage(const std::vector<chem::Molecule>& set, const std::vector<chem::Molecule>& inputs, double delta,
                const fp::FingerprintParams& params = {});

// Mean nearest-member distance over inputs. Empty set -> error.
double cost(const std::vector<fp::Fingerprint>& set, const std::vector<fp::Fingerprint>& inputs);
double cost(const std::vector<chem::Molecule>& set, const std::vector<chem::Molecule>& inputs,
            const fp::FingerprintParams& params = {});

struct ScoreWeights {
  double alpha = 1.0;
  double beta = 10.0;
  double delta = 0.87;
};

// valid * (alpha p + beta cov).
double combined_score(bool valid, double p, double cov, const ScoreWeights& w);

struct CandidateScore {
  chem::Molecule mol;
  std::string key;  // canonical key, empty when invalid
  bool valid = false;
  bool counterfactual = false;  // predicted class == target class
  double p = 0.0;               // target-class probability
  double cov = 0.0;             // individual coverage of the input set
  double score = 0.0;           // valid * (alpha p + beta cov)
  std::vector<char> covers;     // per input: distance <= delta
};

// Scores candidates against a fixed input set with a frozen classifier.
class Scorer {
 public:
  Scorer(std::vector<chem::Molecule> inputs, const gnn::GnnModel& classifier, int target_class,
         ScoreWeights weights = {}, fp::FingerprintParams fp_params = {});

  CandidateScore score(const chem::Molecule& candidate) const;
  // Score only (skips the key and coverage vector).
  double reward(const chem::Molecule& candidate) const;

  const std::vector<chem::Molecule>& inputs() const { return inputs_; }
  const std::vector<fp::Fingerprint>& input_fps() const { return input_fps_; }
  const gnn::GnnModel& classifier() const { return *classifier_; }
  int target_class() const { return target_; }
  const ScoreWeights& weights() const { return weights_; }
  const fp::FingerprintParams& fp_params() const { return fp_params_; }

 private:
  std::vector<chem::Molecule> inputs_;
  std::vector<fp::Fingerprint> input_fps_;
  const gnn::GnnModel* classifier_;
  int target_;
  ScoreWeights weights_;
  fp::FingerprintParams fp_params_;
};

enum class SelectionMode { SetCoverage, Modular };

struct Selection {
  std::vector<std::size_t> order;  // indices into the candidate list
  std::vector<double> gains;
  bool short_pool = false;         // fewer distinct candidates than k
};

// Greedy top-k. SetCoverage: gain = alpha valid p + beta (cov(S+C) - cov(S)).
// Modular: gain = score, i.e. a descending sort. Ties go to the lower index;
// candidates repeating an already selected key are skipped.
Selection greedy_topk(const std::vector<CandidateScore>& candidates, std::size_t k, std::size_t input_count,
                      SelectionMode mode, const ScoreWeights& weights = {});

// Set objective the greedy maximizes in SetCoverage mode.
double set_objective(const std::vector<CandidateScore>& candidates, const std::vector<std::size_t>& chosen,
                     std::size_t input_count, const ScoreWeights& weights = {});

}  // namespace cfx::explain
