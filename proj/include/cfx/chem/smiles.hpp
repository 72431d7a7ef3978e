#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfx/chem/molecule.hpp"

namespace cfx::chem {

class SmilesError : public std::runtime_error {
 public:
  SmilesError(std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Kekulized SMILES subset: organic-subset atoms B C N O P S F Cl Br I,
// bracket atoms with optional H count and charge, bonds - = #, branches and
// ring closures (digits and %nn). Aromatic atoms, stereo marks, isotopes and
// '.' are rejected. Bracket H counts are accepted but not stored.
Molecule parse_smiles(std::string_view text);

// Deterministic SMILES starting at atom 0, neighbors visited in index order.
// Throws MoleculeError for empty or disconnected molecules.
std::string write_smiles(const Molecule& mol);

// SMILES written from `start`, visiting neighbors by ascending priority.
std::string write_smiles_ordered(const Molecule& mol, const std::vector<int>& priority,
                                 int start);

}  // namespace cfx::chem
