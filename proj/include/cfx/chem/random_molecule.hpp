#pragma once

#include <utility>
#include <vector>

#include "cfx/chem/molecule.hpp"
#include "cfx/numkit/rng.hpp"

namespace cfx::chem {

struct RandomMoleculeOptions {
  int min_atoms = 3;
  int max_atoms = 12;
  // (atomic number, relative weight)
  std::vector<std::pair<int, double>> element_weights{
      {6, 10.0}, {7, 2.0}, {8, 2.0}, {16, 0.5}, {9, 0.4}, {17, 0.4}, {35, 0.2}};
  double double_bond_prob = 0.15;
  double triple_bond_prob = 0.02;
  // Expected number of ring closures attempted per molecule.
  double ring_closures = 0.8;
  // Probability that an N is written as N+ with an O- neighbor added.
  double zwitterion_prob = 0.0;
};

// Grows a connected, valence-valid molecule atom by atom, then closes rings
// of size 5-6 where free valence allows.
Molecule random_molecule(nk::Rng& rng, const RandomMoleculeOptions& options = {});

// Uniformly random atom permutation.
std::vector<int> random_permutation(nk::Rng& rng, std::size_t n);

}  // namespace cfx::chem
