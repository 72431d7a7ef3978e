#include <algorithm>
#include <set>

#include "cfx/chem/canonical.hpp"
#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/fragvocab/vocab.hpp"
#include "doctest.h"

using namespace cfx;

namespace {

std::vector<chem::Molecule> random_corpus(std::uint64_t seed, int n) {
  nk::Rng rng(seed);
  std::vector<chem::Molecule> out;
  for (int i = 0; i < n; ++i) out.push_back(chem::random_molecule(rng));
  return out;
}

}  // namespace

TEST_CASE("first merge on a CCO corpus breaks the count tie by key") {
  std::vector<chem::Molecule> corpus(7, chem::parse_smiles("CCO"));
  const auto vocab = fragvocab::mine_vocab(corpus, 4);
  REQUIRE(vocab.size() == 4);
  CHECK(vocab[0].key == "C");
  CHECK(vocab[0].frequency == 14);
  CHECK(vocab[1].key == "O");
  CHECK(vocab[1].frequency == 7);
  // C-C and C-O each occur 7 times; "CC" < "CO".
  CHECK(vocab[2].key == "CC");
  CHECK(vocab[2].frequency == 7);
  CHECK(vocab[3].key == chem::canonical_key(chem::parse_smiles("CCO")));
  CHECK(vocab.stop_id() == 4);
}

TEST_CASE("target equal to atom-type count gives only single atoms") {
  std::vector<chem::Molecule> corpus{chem::parse_smiles("CCO"), chem::parse_smiles("CN")};
  const auto vocab = fragvocab::mine_vocab(corpus, 3);
  REQUIRE(vocab.size() == 3);
  for (const auto& e : vocab.entries()) CHECK(e.pattern.atom_count() == 1);
  CHECK(vocab.single_atom({6, 0}) >= 0);
  CHECK(vocab.single_atom({7, 0}) >= 0);
  CHECK(vocab.single_atom({8, 0}) >= 0);
  CHECK(vocab.single_atom({16, 0}) == -1);
  CHECK_THROWS_AS(fragvocab::mine_vocab(corpus, 2), fragvocab::VocabError);
  CHECK_THROWS_AS(fragvocab::mine_vocab({}, 10), fragvocab::VocabError);
}

TEST_CASE("charged atom types get their own entries") {
  std::vector<chem::Molecule> corpus{chem::parse_smiles("C[N+](=O)[O-]")};
  const auto vocab = fragvocab::mine_vocab(corpus, 4);
  CHECK(vocab.single_atom({7, 1}) >= 0);
  CHECK(vocab.single_atom({8, -1}) >= 0);
  CHECK(vocab.single_atom({7, 0}) == -1);
}

TEST_CASE("mining is a prefix of mining with a larger target") {
  const auto corpus = random_corpus(3, 120);
  const auto small = fragvocab::mine_vocab(corpus, 30);
  const auto large = fragvocab::mine_vocab(corpus, 60);
  REQUIRE(small.size() == 30);
  REQUIRE(large.size() == 60);
  for (int i = 0; i < 30; ++i) {
    CHECK(small[i].key == large[i].key);
    CHECK(small[i].frequency == large[i].frequency);
  }
  std::set<std::string> keys;
  for (const auto& e : large.entries()) {
    CHECK(e.pattern.atom_count() <= fragvocab::kMaxFragmentAtoms);
    CHECK(e.frequency > 0);
    keys.insert(chem::canonical_key(e.pattern));
  }
  CHECK(keys.size() == large.size());
}

TEST_CASE("single atom decomposes to one fragment") {
  const auto vocab = fragvocab::mine_vocab(random_corpus(1, 50), 40);
  const auto dec = fragvocab::decompose(chem::parse_smiles("C"), vocab);
  REQUIRE(dec.fragments.size() == 1);
  CHECK(vocab[dec.fragments[0].vocab_id].key == "C");
  CHECK(dec.inter_bonds.empty());
  CHECK_THROWS_AS(fragvocab::decompose(chem::parse_smiles("CB"), vocab), fragvocab::VocabError);
}

TEST_CASE("decomposition partitions atoms and reassembles the input") {
  const auto vocab = fragvocab::mine_vocab(random_corpus(11, 200), 80);
  nk::Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto m = chem::random_molecule(rng);
    const auto dec = fragvocab::decompose(m, vocab);

    std::vector<int> hits(m.atom_count(), 0);
    for (const auto& f : dec.fragments)
      for (int a : f.atoms) ++hits[a];
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

    // Independent reassembly: each fragment is exactly its entry as an
    // induced subgraph, and intra + inter bonds account for every bond.
    std::size_t intra = 0;
    for (const auto& f : dec.fragments) {
      const auto sub = m.induced(f.atoms);
      CHECK(chem::canonical_key(sub) == vocab[f.vocab_id].key);
      intra += sub.bond_count();
    }
    CHECK(intra + dec.inter_bonds.size() == m.bond_count());
    for (const auto& b : dec.inter_bonds) CHECK(m.bond_order(b.a, b.b) == b.order);

    int last = -1;
    for (const auto& f : dec.fragments) {
      const int lo = *std::min_element(f.atoms.begin(), f.atoms.end());
      CHECK(lo > last);
      last = lo;
    }
    CHECK(chem::isomorphic(fragvocab::compose(dec, vocab, m.atom_count()), m));
  }
}

TEST_CASE("vocabulary json round trip") {
  const auto vocab = fragvocab::mine_vocab(random_corpus(5, 60), 35);
  const auto back = fragvocab::FragmentVocab::from_json(vocab.to_json());
  REQUIRE(back.size() == vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    CHECK(back[static_cast<int>(i)].key == vocab[static_cast<int>(i)].key);
    CHECK(back[static_cast<int>(i)].frequency == vocab[static_cast<int>(i)].frequency);
  }
  CHECK_THROWS_AS(fragvocab::FragmentVocab::from_json("{"), fragvocab::VocabError);
  CHECK_THROWS_AS(fragvocab::FragmentVocab::from_json(R"([{"smiles":"C","frequency":0,"id":0}])"),
                  fragvocab::VocabError);
}
