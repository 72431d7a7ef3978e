#include <cmath>
#include <set>

#include "cfx/baselines/baselines.hpp"
#include "cfx/chem/canonical.hpp"
#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/chem/validity.hpp"
#include "cfx/fragvocab/vocab.hpp"
#include "doctest.h"

using namespace cfx;

namespace {

const chem::ElementSet kCNO = chem::ElementSet::from_symbols({"C", "N", "O"});

std::vector<chem::Molecule> corpus(std::uint64_t seed, int n) {
  nk::Rng rng(seed);
  chem::RandomMoleculeOptions opt;
  opt.min_atoms = 2;
  opt.max_atoms = 6;
  opt.element_weights = {{6, 10.0}, {7, 2.0}, {8, 2.0}};
  std::vector<chem::Molecule> out;
  for (int i = 0; i < n; ++i) out.push_back(chem::random_molecule(rng, opt));
  return out;
}

struct World {
  std::vector<chem::Molecule> mols = corpus(3, 60);
  fragvocab::FragmentVocab vocab = fragvocab::mine_vocab(mols, 20);
  genvae::VaeModel vae{vocab, kCNO, tiny(), 4};
  gnn::GnnModel gnn{kCNO, {8, 2, gnn::UpdateMode::Concat}, 5};

  static genvae::VaeConfig tiny() {
    genvae::VaeConfig c;
    c.latent = 6;
    c.trunk = {8, 2, gnn::UpdateMode::Concat};
    c.frag_embed = 5;
    c.dec_hidden = 7;
    c.atom_embed = 6;
    c.pair_hidden = 5;
    return c;
  }

  int base = gnn.predict(mols[0]);
  int target = 1 - base;

  std::vector<chem::Molecule> inputs(std::size_t n) const {
    const int cls = base;
    std::vector<chem::Molecule> out;
    for (const auto& m : mols)
      if (gnn.predict(m) == cls && out.size() < n) out.push_back(m);
    return out;
  }
};

genvae::DecodeOptions fast() {
  genvae::DecodeOptions d;
  d.beam = 2;
  return d;
}

}  // namespace

TEST_CASE("Metropolis acceptance and the annealing schedule") {
  CHECK(baselines::metropolis_acceptance(0.0, 0.1) == 1.0);
  CHECK(baselines::metropolis_acceptance(0.4, 0.1) == 1.0);
  CHECK(baselines::metropolis_acceptance(-0.1, 0.1) == doctest::Approx(0.3679).epsilon(1e-4));
  CHECK(baselines::metropolis_acceptance(-0.1, 0.1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(baselines::metropolis_acceptance(-1e-3, 1e-6) == 0.0);
  baselines::SaSchedule s;
  CHECK(s.at(0) == 0.1);
  CHECK(s.at(9) == 0.1);
  CHECK(s.at(10) == 0.05);
  CHECK(s.at(25) == doctest::Approx(0.025));
}

TEST_CASE("legal edits are valid and never empty the molecule") {
  auto single = chem::parse_smiles("C");
  for (const auto& m : baselines::legal_edits(single, kCNO)) {
    CHECK(m.atom_count() == 2);
    CHECK(chem::is_valid(m));
  }
  auto ethane = chem::parse_smiles("CC");
  auto edits = baselines::legal_edits(ethane, kCNO);
  std::set<std::string> keys;
  for (const auto& m : edits) keys.insert(chem::canonical_key(m));
  // C=C, C#C, deletion to C, and additions of C/N/O.
  for (const char* s : {"C=C", "C#C", "C", "CCC", "CCN", "CCO"}) CHECK(keys.count(chem::canonical_key(chem::parse_smiles(s))));
  for (const auto& m : corpus(9, 30))
    for (const auto& e : baselines::legal_edits(m, kCNO)) CHECK(chem::is_valid(e));
}

TEST_CASE("walk pools are valid counterfactuals within budget") {
  World w;
  auto inputs = w.inputs(5);
  REQUIRE(inputs.size() == 5);
  explain::Scorer scorer(inputs, w.gnn, w.target);
  auto r = baselines::walk_baseline(scorer, kCNO, 12, 1);
  CHECK(r.evaluations <= 60);
  for (const auto& m : r.pool) {
    CHECK(chem::is_valid(m));
    CHECK(w.gnn.predict(m) == w.target);
  }
  auto again = baselines::walk_baseline(scorer, kCNO, 12, 1);
  REQUIRE(again.pool.size() == r.pool.size());
  for (std::size_t i = 0; i < r.pool.size(); ++i)
    CHECK(chem::write_smiles(again.pool[i]) == chem::write_smiles(r.pool[i]));
}

TEST_CASE("plain sampling stops at the first counterfactual") {
  World w;
  auto inputs = w.inputs(6);
  explain::Scorer scorer(inputs, w.gnn, w.target);
  auto r = baselines::sample_baseline(w.vae, scorer, 7, fast(), 2);
  CHECK(r.evaluations <= 42);
  for (const auto& m : r.pool) CHECK(chem::is_valid(m));

  std::size_t cf = 0;
  for (const auto& m : r.pool) cf += w.gnn.predict(m) == w.target ? 1 : 0;
  CHECK(cf <= inputs.size());

  // A classifier that flags everything: each input stops at its first valid decode.
  gnn::GnnModel all(kCNO, {8, 2, gnn::UpdateMode::Concat}, 5);
  auto t = all.export_tensors();
  for (auto& [name, tensor] : t) {
    if (name == "head.w") tensor.fill(0.0);
    if (name == "head.b") tensor[1] = 5.0;
  }
  all.import_tensors(t);
  REQUIRE(all.predict(inputs[0]) == 1);
  explain::Scorer yes(inputs, all, 1);
  auto first = baselines::sample_baseline(w.vae, yes, 7, fast(), 2);
  CHECK(first.pool.size() <= inputs.size());
  CHECK(first.evaluations >= inputs.size());
  for (const auto& m : first.pool) CHECK(chem::is_valid(m));
}

TEST_CASE("simulated annealing accepts only valid states") {
  World w;
  auto inputs = w.inputs(4);
  explain::Scorer scorer(inputs, w.gnn, w.target);
  baselines::SaConfig cfg;
  cfg.steps = 10;
  cfg.decode = fast();
  auto r = baselines::sa_baseline(w.vae, scorer, cfg, 3);
  CHECK(r.evaluations == 40);
  CHECK(r.pool.size() <= 40);
  for (const auto& m : r.pool) CHECK(chem::is_valid(m));
  cfg.propose_from_input = true;
  auto lit = baselines::sa_baseline(w.vae, scorer, cfg, 3);
  CHECK(lit.evaluations == 40);

  CHECK(r.chain_scores.size() == 40);

  // Near-zero temperature: the chain never moves to a worse state.
  cfg.propose_from_input = false;
  cfg.schedule.initial = 1e-6;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    explain::Scorer one({inputs[i]}, w.gnn, w.target);
    auto g = baselines::sa_baseline(w.vae, one, cfg, 4 + i);
    double prev = one.reward(inputs[i]);
    for (double s : g.chain_scores) {
      CHECK(s >= prev);
      prev = s;
    }
  }
}
