#pragma once

#include <string>
#include <vector>

#include "cfx/chem/molecule.hpp"

namespace cfx::chem {

// Iterative neighborhood refinement. Initial class: (element, charge, degree,
// sorted bond orders); each round re-ranks atoms by (class, sorted
// (bond order, neighbor class) pairs) until the partition stops splitting.
// Returned classes are dense ranks, equal for refinement-equivalent atoms.
std::vector<int> refined_classes(const Molecule& mol);

// Distinct canonical ranks: refined classes with ties broken by
// individualizing the smallest-index atom of the first tied class and
// refining again.
std::vector<int> canonical_ranks(const Molecule& mol);

// SMILES written from the top-ranked atom with neighbors visited by rank.
// Tied classes are resolved by trying each member and keeping the
// lexicographically smallest string, so the key does not depend on input
// atom order. Throws MoleculeError for empty/disconnected molecules.
std::string canonical_key(const Molecule& mol);

}  // namespace cfx::chem
