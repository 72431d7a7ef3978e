#pragma once

#include <string>
#include <vector>

#include "cfx/chem/molecule.hpp"

namespace cfx::chem {

struct Violation {
  int atom;  // -1 for whole-molecule rules
  std::string rule;
  std::string detail;
};

struct ValidityReport {
  bool valid = true;
  std::vector<Violation> violations;
};

// Allowed total bond orders for an (element, charge) pair, ascending.
// Empty when the combination is not supported.
//   neutral: C 4, N 3, O 2, F/Cl/Br/I 1, S 2/4/6, P 3/5, B 3
//   N+ 4, P+ 4/6, O- 1, S- 1/3/5
std::vector<int> allowed_valences(int element, int charge);
// Largest allowed valence, or -1 when unsupported.
int max_valence(int element, int charge);

// Implicit hydrogens: smallest allowed valence >= bond-order sum, minus the
// sum; 0 when the atom is over-valent or unsupported.
int implicit_hydrogens(const Molecule& mol, int atom);

// Rules: "element" (unsupported element/charge), "valence", "connectivity",
// "empty".
ValidityReport check_validity(const Molecule& mol);
inline bool is_valid(const Molecule& mol) { return check_validity(mol).valid; }

}  // namespace cfx::chem
