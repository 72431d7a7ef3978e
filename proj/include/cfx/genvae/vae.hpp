#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/chem/featurize.hpp"
#include "cfx/chem/molecule.hpp"
#include "cfx/fragvocab/vocab.hpp"
#include "cfx/gnn/gnn.hpp"
#include "cfx/numkit/params.hpp"
#include "cfx/numkit/rng.hpp"
#include "cfx/numkit/tape.hpp"

namespace cfx::genvae {

class VaeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VaeConfig {
  std::size_t latent = 56;
  gnn::TrunkConfig trunk{};
  std::size_t frag_embed = 32;
  std::size_t dec_hidden = 96;
  std::size_t atom_embed = 32;
  std::size_t pair_hidden = 32;
  int n_max = 10;
};

struct LatentGaussian {
  std::vector<double> mu;
  std::vector<double> log_sigma;
};

struct Encoding {
  LatentGaussian latent;
  std::vector<double> h_graph;  // pooled encoder trunk state
};

// z = mu + exp(log_sigma) * eps, eps ~ N(0, I).
std::vector<double> sample_latent(const LatentGaussian& g, nk::Rng& rng);
// KL(N(mu, sigma) || N(0, I)) = sum 0.5 (mu^2 + sigma^2 - 1 - 2 log sigma).
double kl_divergence(const LatentGaussian& g);

enum class DecodeMode { Beam, Sample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::Beam;
  int beam = 10;
  double temperature = 1.0;
  // Tokens imposed on the first steps (the STOP id ends the sequence).
  std::vector<int> forced;
};

// Everything needed to recompute the likelihood of a decode.
struct DecodeTrace {
  std::vector<int> tokens;                   // fragment ids, STOP excluded
  bool stopped = false;                      // ended on STOP rather than n_max
  std::vector<std::vector<double>> step_logits;  // one row of V+1 per step
  std::vector<std::pair<int, int>> pairs;        // cross-fragment atom pairs
  std::vector<std::vector<double>> pair_logits;  // 4 classes per pair
  std::vector<int> pair_class;                   // 0 = none, else bond order
  double log_likelihood = 0.0;
};

// A decode either yields a valid molecule or a failure value carrying the
// best invalid attempt.
struct DecodeResult {
  bool ok = false;
  chem::Molecule mol;
  DecodeTrace trace;
  std::string failure;
};

// Teacher-forcing target for one molecule.
struct Example {
  chem::Molecule mol;
  std::vector<int> tokens;
  // Assembled atom layout: fragment-major, pattern order inside fragments.
  std::vector<int> atom_vocab;       // vocab id of the owning fragment
  std::vector<int> atom_in_frag;     // pattern atom index
  std::vector<int> atom_frag;        // position of the fragment in `tokens`
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> pair_class;
};

Example make_example(const chem::Molecule& mol, const fragvocab::FragmentVocab& vocab);

struct ElboParts {
  nk::Var loss;          // mean over the batch of recon + kl_weight * kl
  double recon = 0.0;    // mean negative log-likelihood
  double kl = 0.0;       // mean KL
  std::size_t tokens = 0;
  std::size_t correct_tokens = 0;
};

class VaeModel {
 public:
  VaeModel(fragvocab::FragmentVocab vocab, chem::ElementSet elements, VaeConfig config,
           std::uint64_t seed);

  const VaeConfig& config() const { return config_; }
  const fragvocab::FragmentVocab& vocab() const { return vocab_; }
  const chem::ElementSet& elements() const { return elements_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }
  std::size_t graph_width() const { return config_.trunk.hidden; }

  Encoding encode(const chem::Molecule& mol) const;
  DecodeResult decode(const std::vector<double>& z, const DecodeOptions& options, nk::Rng& rng) const;

  // Joint log-probability of a token sequence and edge classes given z,
  // computed by the teacher-forcing path.
  double log_likelihood(const std::vector<double>& z, const std::vector<int>& tokens,
                        const std::vector<int>& pair_class) const;

  // Negative ELBO over a batch. `eps` holds one standard-normal row per
  // example ([batch, latent]); passing the same eps gives common random
  // numbers across evaluations.
  ElboParts elbo(nk::Tape& tape, const std::vector<const Example*>& batch, const nk::Tensor& eps,
                 bool trainable, double kl_weight = 1.0) const;

  nk::NamedTensors export_tensors() const;
  void save(const std::filesystem::path& path) const;
  static VaeModel load(const std::filesystem::path& path, fragvocab::FragmentVocab vocab);

 private:
  nk::Var encoder_graph(nk::Tape& tape, const gnn::BatchGraph& batch, bool trainable) const;
  nk::Var gru_step(nk::Tape& tape, nk::Var h, const std::vector<int>& inputs, nk::Var z,
                   bool trainable) const;
  nk::Var token_logits(nk::Tape& tape, nk::Var h, bool trainable) const;
  nk::Var edge_logits(nk::Tape& tape, const nk::Tensor& atom_features, nk::Var context,
                      nk::Var z_rows, const std::vector<int>& left, const std::vector<int>& right,
                      bool trainable) const;
  nk::Tensor atom_features(const std::vector<int>& atom_vocab, const std::vector<int>& atom_in_frag) const;
  nk::Var bind(nk::Tape& tape, const std::string& name, bool trainable) const;

  fragvocab::FragmentVocab vocab_;
  chem::ElementSet elements_;
  VaeConfig config_;
  mutable nk::ParamStore params_;
};

struct VaeTrainConfig {
  int epochs = 60;
  double lr = 3e-3;
  std::size_t batch_size = 32;
  // Weight on the KL term during training. At 1.0 the posterior collapses on
  // desk-scale corpora and z stops carrying the molecule.
  double kl_weight = 0.1;
  std::uint64_t seed = 0;
};

struct VaeEpochLog {
  int epoch;
  double loss;
  double recon;
  double kl;
  double token_acc;
};

struct VaeTrainResult {
  VaeModel model;
  std::vector<VaeEpochLog> curve;
  int best_epoch = 0;
  std::size_t skipped = 0;  // molecules with more than n_max fragments
};

// Adam on the negative ELBO; returns the parameters of the lowest-loss epoch.
VaeTrainResult train_vae(const std::vector<chem::Molecule>& corpus, const fragvocab::FragmentVocab& vocab,
                         const chem::ElementSet& elements, const VaeConfig& model_config,
                         const VaeTrainConfig& config, std::ostream* log = nullptr);

// Teacher-forced next-token accuracy (STOP included) with z = mu.
double token_accuracy(const VaeModel& model, const std::vector<Example>& examples);

}  // namespace cfx::genvae
