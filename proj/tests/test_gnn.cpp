#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/gnn/gnn.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cfx;

namespace {

bool contains_oxygen(const chem::Molecule& m) {
  for (std::size_t i = 0; i < m.atom_count(); ++i)
    if (m.atom(static_cast<int>(i)).element == 8) return true;
  return false;
}

std::vector<gnn::LabeledMolecule> oxygen_task(std::uint64_t seed, int n) {
  nk::Rng rng(seed);
  chem::RandomMoleculeOptions opt;
  opt.max_atoms = 9;
  opt.element_weights = {{6, 10.0}, {7, 2.0}, {8, 1.5}};
  std::vector<gnn::LabeledMolecule> out;
  for (int i = 0; i < n; ++i) {
    auto m = chem::random_molecule(rng, opt);
    const int label = contains_oxygen(m) ? 1 : 0;
    out.push_back({std::move(m), label});
  }
  return out;
}

void zero_all(nk::ParamStore& ps) {
  for (auto& [name, p] : ps) p.value.fill(0.0);
}

}  // namespace

TEST_CASE("probabilities are normalized") {
  gnn::GnnModel model(chem::ElementSet(), {}, 3);
  nk::Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto p = model.forward(chem::random_molecule(rng));
    CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-6);
  }
}

TEST_CASE("zero weights give an even split") {
  for (auto mode : {gnn::UpdateMode::Concat, gnn::UpdateMode::Additive}) {
    gnn::GnnModel model(chem::ElementSet(), {16, 3, mode}, 1);
    zero_all(model.params());
    const auto m = chem::parse_smiles("CC(=O)N");
    const auto p = model.forward(m);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(model.predict_prob(m, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("forward is invariant under atom permutation") {
  gnn::GnnModel model(chem::ElementSet(), {}, 8);
  nk::Rng rng(12);
  for (int i = 0; i < 40; ++i) {
    const auto m = chem::random_molecule(rng);
    const auto p = model.forward(m);
    const auto q = model.forward(m.permuted(chem::random_permutation(rng, m.atom_count())));
    CHECK(std::abs(p[1] - q[1]) < 1e-12);
  }
}

TEST_CASE("unknown element is rejected") {
  gnn::GnnModel model(chem::ElementSet::from_symbols({"C", "O"}), {}, 1);
  CHECK_THROWS(model.forward(chem::parse_smiles("CN")));
  CHECK_THROWS_AS(model.predict_prob(chem::parse_smiles("CO"), 2), std::invalid_argument);
}

TEST_CASE("gradients match finite differences on a three-atom molecule") {
  for (auto mode : {gnn::UpdateMode::Concat, gnn::UpdateMode::Additive}) {
    gnn::GnnModel model(chem::ElementSet(), {8, 3, mode}, 21);
    const auto m = chem::parse_smiles("N=CO");
    const auto batch = gnn::make_batch({&m}, model.elements());
    auto check = testing::gradcheck(model.params(), [&](nk::Tape& tape) {
      auto lp = nk::log_softmax_rows(model.logits(tape, batch, true));
      const std::vector<int> target{1};
      return nk::neg(nk::pick(lp, target));
    });
    INFO("worst tensor: " << check.worst);
    CHECK(check.max_rel_err < 1e-4);
  }
}

TEST_CASE("training rejects empty splits and bad labels") {
  auto data = oxygen_task(1, 4);
  gnn::GnnTrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(gnn::train_classifier({}, data, cfg), std::invalid_argument);
  CHECK_THROWS_AS(gnn::train_classifier(data, {}, cfg), std::invalid_argument);
  data[0].label = 3;
  CHECK_THROWS_AS(gnn::train_classifier(data, data, cfg), std::invalid_argument);
}

TEST_CASE("learns the oxygen rule and reloads exactly") {
  const auto train = oxygen_task(100, 200);
  const auto valid = oxygen_task(200, 60);
  gnn::GnnTrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 7;
  std::ostringstream log;
  const auto result = gnn::train_classifier(train, valid, cfg, &log);

  double best_train = 0.0;
  for (const auto& e : result.curve) best_train = std::max(best_train, e.train_acc);
  CHECK(best_train >= 0.95);
  CHECK(result.best_valid_acc == gnn::accuracy(result.model, valid));

  // Mean loss over consecutive 50-epoch blocks never rises.
  std::vector<double> blocks;
  for (std::size_t s = 0; s + 50 <= result.curve.size(); s += 50) {
    double sum = 0.0;
    for (std::size_t i = s; i < s + 50; ++i) sum += result.curve[i].train_loss;
    blocks.push_back(sum / 50.0);
  }
  REQUIRE(blocks.size() == 4);
  for (std::size_t i = 1; i < blocks.size(); ++i) CHECK(blocks[i] <= blocks[i - 1]);

  int lines = 0;
  std::string line;
  std::istringstream in(log.str());
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 200);

  for (const auto& d : train) {
    if (result.model.predict(d.mol) == d.label) {
      CHECK(result.model.predict_prob(d.mol, d.label) > 0.5);
    }
  }
  std::vector<double> positive_probs;
  for (const auto& d : train)
    if (d.label == 1) positive_probs.push_back(result.model.predict_prob(d.mol, 1));
  REQUIRE(!positive_probs.empty());
  std::sort(positive_probs.begin(), positive_probs.end());
  CHECK(positive_probs[positive_probs.size() / 2] > 0.9);

  const auto path = std::filesystem::temp_directory_path() / "cfx_test_gnn.cfxm";
  result.model.save(path);
  const auto loaded = gnn::GnnModel::load(path);
  CHECK(gnn::accuracy(loaded, valid) == result.best_valid_acc);
  CHECK(loaded.forward(valid[0].mol) == result.model.forward(valid[0].mol));
  std::filesystem::remove(path);
}
