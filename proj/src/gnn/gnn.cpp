#include "cfx/gnn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfx/numkit/adam.hpp"
#include "cfx/numkit/checkpoint.hpp"
#include "json.hpp"

namespace cfx::gnn {

BatchGraph make_batch(const std::vector<const chem::Molecule*>& mols,
                      const chem::ElementSet& elements) {
  BatchGraph b;
  b.graphs = mols.size();
  std::size_t atoms = 0, directed = 0;
  for (const auto* m : mols) {
    atoms += m->atom_count();
    directed += 2 * m->bond_count();
  }
  const std::size_t width = chem::node_feature_width(elements);
  b.nodes = nk::Tensor::matrix(atoms, width);
  b.edges = nk::Tensor::matrix(directed, chem::kBondFeatures);
  std::size_t node_off = 0, edge_off = 0;
  for (std::size_t g = 0; g < mols.size(); ++g) {
    if (mols[g]->empty()) throw chem::MoleculeError("cannot featurize an empty molecule");
    const auto f = chem::featurize(*mols[g], elements);
    std::copy(f.nodes.vec().begin(), f.nodes.vec().end(),
              b.nodes.vec().begin() + static_cast<std::ptrdiff_t>(node_off * width));
    std::copy(f.edges.vec().begin(), f.edges.vec().end(),
              b.edges.vec().begin() + static_cast<std::ptrdiff_t>(edge_off * chem::kBondFeatures));
    for (std::size_t k = 0; k < f.src.size(); ++k) {
      b.src.push_back(f.src[k] + static_cast<int>(node_off));
      b.dst.push_back(f.dst[k] + static_cast<int>(node_off));
    }
    b.graph_of_node.insert(b.graph_of_node.end(), mols[g]->atom_count(), static_cast<int>(g));
    node_off += mols[g]->atom_count();
    edge_off += f.src.size();
  }
  return b;
}

void init_trunk(nk::ParamStore& params, const std::string& prefix, std::size_t in_width,
                const TrunkConfig& config, nk::Rng& rng) {
  const std::size_t d = config.hidden;
  params.add_glorot(prefix + "in.w", in_width, d, rng);
  params.add_zeros(prefix + "in.b", 1, d);
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = prefix + "l" + std::to_string(l) + ".";
    params.add_glorot(p + "msg.self", d, d, rng);
    params.add_glorot(p + "msg.nbr", d, d, rng);
    params.add_glorot(p + "msg.edge", chem::kBondFeatures, d, rng);
    params.add_zeros(p + "msg.b", 1, d);
    if (config.update == UpdateMode::Concat) params.add_glorot(p + "upd.h", d, d, rng);
    params.add_glorot(p + "upd.m", d, d, rng, 0.5);
    params.add_zeros(p + "upd.b", 1, d);
  }
}

nk::Var trunk_forward(nk::Tape& tape, nk::ParamStore& params, const std::string& prefix,
                      const BatchGraph& batch, const TrunkConfig& config, bool trainable) {
  auto P = [&](const std::string& name) {
    auto& p = params.get(prefix + name);
    return trainable ? tape.param(p) : tape.frozen(p);
  };
  const std::size_t n = batch.nodes.rows();
  nk::Var h = nk::tanh(nk::add_row(nk::matmul(tape.constant(batch.nodes), P("in.w")), P("in.b")));
  nk::Var e = tape.constant(batch.edges);
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    nk::Var m;
    if (batch.src.empty()) {
      m = tape.constant(nk::Tensor::matrix(n, config.hidden));
    } else {
      nk::Var self = nk::gather_rows(nk::matmul(h, P(p + "msg.self")), batch.dst);
      nk::Var nbr = nk::gather_rows(nk::matmul(h, P(p + "msg.nbr")), batch.src);
      nk::Var pre = nk::add_row(nk::add(nk::add(self, nbr), nk::matmul(e, P(p + "msg.edge"))),
                                P(p + "msg.b"));
      m = nk::scatter_add_rows(nk::tanh(pre), batch.dst, n);
    }
    if (config.update == UpdateMode::Concat) {
      h = nk::tanh(nk::add_row(
          nk::add(nk::matmul(h, P(p + "upd.h")), nk::matmul(m, P(p + "upd.m"))), P(p + "upd.b")));
    } else {
      h = nk::add(h, nk::tanh(nk::add_row(nk::matmul(m, P(p + "upd.m")), P(p + "upd.b"))));
    }
  }
  return h;
}

GnnModel::GnnModel(chem::ElementSet elements, TrunkConfig config, std::uint64_t seed)
    : elements_(std::move(elements)), config_(config) {
  auto rng = nk::Rng::stream(seed, "gnn.init");
  init_trunk(params_, "trunk.", chem::node_feature_width(elements_), config_, rng);
  params_.add_glorot("head.w", config_.hidden, 2, rng);
  params_.add_zeros("head.b", 1, 2);
}

nk::Var GnnModel::logits(nk::Tape& tape, const BatchGraph& batch, bool trainable) const {
  nk::Var h = trunk_forward(tape, params_, "trunk.", batch, config_, trainable);
  nk::Var pooled = nk::segment_max(h, batch.graph_of_node, batch.graphs);
  auto P = [&](const std::string& name) {
    auto& p = params_.get(name);
    return trainable ? tape.param(p) : tape.frozen(p);
  };
  return nk::add_row(nk::matmul(pooled, P("head.w")), P("head.b"));
}

std::array<double, 2> GnnModel::forward(const chem::Molecule& mol) const {
  nk::Tape tape(false);
  const auto batch = make_batch({&mol}, elements_);
  auto probs = nk::softmax_rows(logits(tape, batch, false));
  return {probs.value()[0], probs.value()[1]};
}

double GnnModel::predict_prob(const chem::Molecule& mol, int target_class) const {
  if (target_class != 0 && target_class != 1) throw std::invalid_argument("target class must be 0 or 1");
  return forward(mol)[static_cast<std::size_t>(target_class)];
}

int GnnModel::predict(const chem::Molecule& mol) const {
  const auto p = forward(mol);
  return p[1] > p[0] ? 1 : 0;
}

nk::NamedTensors GnnModel::export_tensors() const {
  nk::NamedTensors out = params_.export_tensors();
  std::vector<double> meta{static_cast<double>(config_.hidden), static_cast<double>(config_.layers),
                           config_.update == UpdateMode::Concat ? 0.0 : 1.0};
  out.emplace_back("meta.config", nk::Tensor::row(meta));
  std::vector<double> elems;
  for (int e : elements_.elements()) elems.push_back(e);
  out.emplace_back("meta.elements", nk::Tensor::row(elems));
  return out;
}

void GnnModel::import_tensors(const nk::NamedTensors& tensors) { params_.import_tensors(tensors); }

void GnnModel::save(const std::filesystem::path& path) const {
  nk::save_checkpoint(path, export_tensors());
}

GnnModel GnnModel::load(const std::filesystem::path& path) {
  const auto tensors = nk::load_checkpoint(path);
  const nk::Tensor* cfg = nullptr;
  const nk::Tensor* els = nullptr;
  for (const auto& [name, t] : tensors) {
    if (name == "meta.config") cfg = &t;
    if (name == "meta.elements") els = &t;
  }
  if (!cfg || !els) throw nk::CheckpointError(path.string() + " is not a classifier checkpoint");
  TrunkConfig tc;
  tc.hidden = static_cast<std::size_t>((*cfg)[0]);
  tc.layers = static_cast<int>((*cfg)[1]);
  tc.update = (*cfg)[2] == 0.0 ? UpdateMode::Concat : UpdateMode::Additive;
  std::vector<int> elems;
  for (double e : els->data()) elems.push_back(static_cast<int>(e));
  GnnModel model(chem::ElementSet(elems), tc, 0);
  model.import_tensors(tensors);
  return model;
}

double accuracy(const GnnModel& model, const std::vector<LabeledMolecule>& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : data) correct += model.predict(d.mol) == d.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

GnnTrainResult train_classifier(const std::vector<LabeledMolecule>& train,
                                const std::vector<LabeledMolecule>& valid,
                                const GnnTrainConfig& config, std::ostream* log) {
  if (train.empty()) throw std::invalid_argument("train_classifier: empty training split");
  if (valid.empty()) throw std::invalid_argument("train_classifier: empty validation split");
  for (const auto* split : {&train, &valid})
    for (const auto& d : *split)
      if (d.label != 0 && d.label != 1) throw std::invalid_argument("labels must be 0 or 1");

  GnnModel model(config.elements, config.trunk, config.seed);
  nk::Adam opt(config.lr);
  auto rng = nk::Rng::stream(config.seed, "gnn.shuffle");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  GnnTrainResult result{model, {}, 0, -1.0};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<const chem::Molecule*> mols;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        mols.push_back(&train[order[k]].mol);
        labels.push_back(train[order[k]].label);
      }
      const auto batch = make_batch(mols, config.elements);
      nk::Tape tape;
      auto logits = model.logits(tape, batch, true);
      auto lp = nk::log_softmax_rows(logits);
      auto loss = nk::neg(nk::mean(nk::pick(lp, labels)));
      for (std::size_t k = 0; k < labels.size(); ++k) {
        const bool pred1 = lp.value().at(k, 1) > lp.value().at(k, 0);
        correct += (pred1 ? 1 : 0) == labels[k] ? 1 : 0;
      }
      loss_sum += loss.item() * static_cast<double>(labels.size());
      tape.backward(loss);
      opt.step(model.params());
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(train.size()),
                   static_cast<double>(correct) / static_cast<double>(train.size()),
                   accuracy(model, valid)};
    result.curve.push_back(entry);
    if (log) {
      *log << nlohmann::json{{"epoch", entry.epoch},
                             {"train_loss", entry.train_loss},
                             {"train_acc", entry.train_acc},
                             {"valid_acc", entry.valid_acc}}
                  .dump()
           << '\n';
    }
    if (entry.valid_acc > result.best_valid_acc) {
      result.best_valid_acc = entry.valid_acc;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

}  // namespace cfx::gnn
