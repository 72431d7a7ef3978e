#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cfx/chem/featurize.hpp"
#include "cfx/chem/molecule.hpp"
#include "cfx/numkit/checkpoint.hpp"
#include "cfx/numkit/params.hpp"
#include "cfx/numkit/tape.hpp"

namespace cfx::gnn {

// Node update form. Concat: h' = tanh(W_h h + W_m m + b). Additive:
// h' = h + tanh(W_m m + b).
enum class UpdateMode { Concat, Additive };

struct TrunkConfig {
  std::size_t hidden = 64;
  int layers = 3;
  UpdateMode update = UpdateMode::Concat;
};

// Disjoint union of molecules, featurized for one batched pass.
struct BatchGraph {
  nk::Tensor nodes;
  std::vector<int> src;
  std::vector<int> dst;
  nk::Tensor edges;
  std::vector<int> graph_of_node;
  std::size_t graphs = 0;
};

BatchGraph make_batch(const std::vector<const chem::Molecule*>& mols,
                      const chem::ElementSet& elements);

// Message-passing trunk: input projection, then per layer
//   m_v = sum_{w in N(v)} tanh(W_s h_v + W_n h_w + W_e e_vw + b)
// followed by the configured update. Parameters live under `prefix`.
void init_trunk(nk::ParamStore& params, const std::string& prefix, std::size_t in_width,
                const TrunkConfig& config, nk::Rng& rng);
nk::Var trunk_forward(nk::Tape& tape, nk::ParamStore& params, const std::string& prefix,
                      const BatchGraph& batch, const TrunkConfig& config, bool trainable);

class GnnModel {
 public:
  GnnModel(chem::ElementSet elements, TrunkConfig config, std::uint64_t seed);

  const chem::ElementSet& elements() const { return elements_; }
  const TrunkConfig& config() const { return config_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  // Class logits [graphs, 2] from the max-pooled node states. With
  // `trainable` the parameters are bound for gradient accumulation.
  nk::Var logits(nk::Tape& tape, const BatchGraph& batch, bool trainable) const;

  std::array<double, 2> forward(const chem::Molecule& mol) const;
  double predict_prob(const chem::Molecule& mol, int target_class) const;
  int predict(const chem::Molecule& mol) const;

  nk::NamedTensors export_tensors() const;
  void import_tensors(const nk::NamedTensors& tensors);
  void save(const std::filesystem::path& path) const;
  static GnnModel load(const std::filesystem::path& path);

 private:
  chem::ElementSet elements_;
  TrunkConfig config_;
  mutable nk::ParamStore params_;
};

struct LabeledMolecule {
  chem::Molecule mol;
  int label = 0;
};

struct GnnTrainConfig {
  int epochs = 1000;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  TrunkConfig trunk;
  chem::ElementSet elements;
};

struct EpochLog {
  int epoch;
  double train_loss;
  double train_acc;
  double valid_acc;
};

struct GnnTrainResult {
  GnnModel model;
  std::vector<EpochLog> curve;
  int best_epoch = 0;
  double best_valid_acc = 0.0;
};

double accuracy(const GnnModel& model, const std::vector<LabeledMolecule>& data);

// Cross-entropy training with Adam; returns the parameters from the epoch
// with the best validation accuracy. `log` receives one JSON line per epoch.
GnnTrainResult train_classifier(const std::vector<LabeledMolecule>& train,
                                const std::vector<LabeledMolecule>& valid,
                                const GnnTrainConfig& config, std::ostream* log = nullptr);

}  // namespace cfx::gnn
