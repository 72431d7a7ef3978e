#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/adapter/adapter.hpp"
#include "cfx/adapter/chain.hpp"
#include "cfx/explain/metrics.hpp"
#include "cfx/genvae/vae.hpp"
#include "cfx/numkit/adam.hpp"

namespace cfx::ppo {

class PpoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Transition {
  chem::Molecule state;
  std::vector<double> h_graph;
  std::vector<double> action;
  double old_log_prob = 0.0;
  double reward = 0.0;
  double q = 0.0;
  double v = 0.0;
  bool decoded = false;
  chem::Molecule candidate;
};

struct Episode {
  std::size_t input = 0;
  std::vector<Transition> steps;
  double mean_reward() const;
};

struct RolloutConfig {
  int steps = 4;      // T during training
  int n_samples = 4;  // decodes per Q estimate, the rollout's own decode included
  genvae::DecodeOptions decode{};
};

// Mean score over n fresh decodes from the shifted latent; failures count 0.
double estimate_q(const genvae::VaeModel& vae, const explain::Scorer& scorer, const genvae::LatentGaussian& shifted,
                  int n_samples, const genvae::DecodeOptions& decode, nk::Rng& rng);

// One episode of `config.steps` transitions starting from `input`. A failed
// decode scores 0 and leaves the state unchanged.
Episode rollout(const chem::Molecule& input, std::size_t input_index, const genvae::VaeModel& vae,
                const adapter::AdapterModel& policy, const explain::Scorer& scorer, const RolloutConfig& config,
                nk::Rng& rng);

// min(rho A, clip(rho, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double eps);

// Q - V over the batch, shifted to zero mean and scaled to unit std.
std::vector<double> normalized_advantages(const std::vector<const Transition*>& batch);

// -mean_i min(rho_i A_i, clip(rho_i) A_i) on the tape, rho from the stored
// old log-probs. Policy parameters only.
nk::Var surrogate_loss(nk::Tape& tape, const adapter::AdapterModel& model, const std::vector<const Transition*>& batch,
                       double eps, bool trainable);

struct PpoConfig {
  double clip = 0.2;
  int epochs = 4;
  double value_coef = 0.5;
  double kl_limit = 0.5;
};

struct UpdateDiagnostics {
  double mean_ratio = 1.0;
  double clip_frac = 0.0;
  double kl = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  int epochs_run = 0;
  bool aborted = false;  // an epoch exceeded the KL limit and was reverted
};

// Clipped-surrogate update over a fixed batch. Advantages Q - V are
// normalized per batch. The optimizer's learning rate is used as is.
UpdateDiagnostics ppo_update(const std::vector<const Transition*>& batch, adapter::AdapterModel& model,
                             nk::Adam& optimizer, const PpoConfig& config);

// Upper-confidence scheduling over input molecules.
class UcbStats {
 public:
  explicit UcbStats(std::size_t arms);
  void record(std::size_t arm, double score);
  std::size_t pulls(std::size_t arm) const { return arms_.at(arm).n; }
  double mean(std::size_t arm) const { return arms_.at(arm).mean; }
  // Sample variance; 0 below two pulls.
  double variance(std::size_t arm) const;
  // Unvisited arms first in index order, then argmax mean + c sqrt(var / n);
  // ties -> lowest index. `exclude` marks arms already taken this round.
  std::size_t select(double c, const std::vector<char>* exclude = nullptr) const;
  std::size_t size() const { return arms_.size(); }

 private:
  struct Arm {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Arm> arms_;
};

struct AdapterTrainConfig {
  int updates = 40;
  std::size_t inputs_per_update = 8;
  double lr = 1e-5;
  double ucb_c = 1.0;
  std::uint64_t seed = 0;
  std::size_t hidden = 400;
  RolloutConfig rollout{};
  PpoConfig ppo{};
};

struct UpdateLog {
  int update;
  double mean_reward;
  double clip_frac;
  double kl;
  double lr;
  bool aborted;
};

struct AdapterTrainResult {
  adapter::AdapterModel model;
  std::vector<UpdateLog> curve;
  int best_update = 0;
  double first_reward = 0.0;
  double best_reward = 0.0;
};

// Learning rate at update u (1-based) of n: linear warmup over the first 10%,
// then linear decay to lr / 10.
double scheduled_lr(double lr, int update, int total);

// Rollouts scheduled by UCB, Monte-Carlo Q, PPO updates. Returns the policy
// whose rollouts earned the best mean reward.
AdapterTrainResult train_adapter(const std::vector<chem::Molecule>& inputs, const genvae::VaeModel& vae,
                                 const explain::Scorer& scorer, const AdapterTrainConfig& config,
                                 std::ostream* log = nullptr);

}  // namespace cfx::ppo
