#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfx/chem/molecule.hpp"

namespace cfx::fragvocab {

class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Fragment {
  chem::Molecule pattern;  // parsed back from `key`, so atom order is stable
  std::string key;         // canonical key, also the SMILES written to disk
  std::size_t frequency = 0;
  int id = 0;
};

// Ordered fragment vocabulary. Single-atom entries come first (sorted by
// key); merged entries follow in mining order. The STOP token id is size().
class FragmentVocab {
 public:
  FragmentVocab() = default;
  explicit FragmentVocab(std::vector<Fragment> entries);

  std::size_t size() const { return entries_.size(); }
  int stop_id() const { return static_cast<int>(entries_.size()); }
  const Fragment& operator[](int id) const { return entries_.at(static_cast<std::size_t>(id)); }
  const std::vector<Fragment>& entries() const { return entries_; }

  // -1 when absent.
  int find(const std::string& key) const;
  int single_atom(const chem::Atom& atom) const;
  std::size_t max_fragment_atoms() const;

  std::string to_json() const;
  static FragmentVocab from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static FragmentVocab load(const std::filesystem::path& path);

 private:
  std::vector<Fragment> entries_;
  std::unordered_map<std::string, int> by_key_;
};

inline constexpr std::size_t kMaxFragmentAtoms = 10;

// Frequency-merge mining: every atom starts as its own fragment; each round
// counts adjacent fragment pairs across the corpus by the canonical key of
// their union, merges all occurrences of the most frequent new pair (ties:
// the smallest key) and records it, until `target_size` entries exist or no pair
// within the size cap remains.
FragmentVocab mine_vocab(const std::vector<chem::Molecule>& corpus, std::size_t target_size,
                         std::size_t max_atoms = kMaxFragmentAtoms);

struct FragmentMatch {
  int vocab_id = 0;
  // atoms[i] is the molecule atom matched to pattern atom i.
  std::vector<int> atoms;
};

struct Decomposition {
  // Ordered by smallest contained atom index.
  std::vector<FragmentMatch> fragments;
  // Bonds between atoms of different fragments, global indices.
  std::vector<chem::Bond> inter_bonds;
  std::vector<int> fragment_of_atom;
};

// Greedy largest-first induced-subgraph matching (ties: higher frequency,
// then lower id); remaining atoms fall back to single-atom entries.
Decomposition decompose(const chem::Molecule& mol, const FragmentVocab& vocab);

// Rebuilds the molecule with its original atom numbering.
chem::Molecule compose(const Decomposition& dec, const FragmentVocab& vocab, std::size_t atom_count);

}  // namespace cfx::fragvocab
