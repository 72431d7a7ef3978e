#pragma once

#include <string>
#include <vector>

#include "cfx/chem/molecule.hpp"
#include "cfx/numkit/tensor.hpp"

namespace cfx::chem {

// Ordered element vocabulary for node features.
class ElementSet {
 public:
  ElementSet();  // C N O S P F Cl Br I
  explicit ElementSet(std::vector<int> atomic_numbers);
  static ElementSet from_symbols(const std::vector<std::string>& symbols);

  std::size_t size() const { return elements_.size(); }
  const std::vector<int>& elements() const { return elements_; }
  // -1 when absent.
  int index_of(int atomic_number) const;
  bool contains(int atomic_number) const { return index_of(atomic_number) >= 0; }
  std::vector<std::string> symbols() const;

 private:
  std::vector<int> elements_;
};

inline constexpr std::size_t kBondFeatures = 3;

// Width of a node feature row: one-hot element, one-hot charge {-1,0,+1},
// degree / 4.
inline std::size_t node_feature_width(const ElementSet& elements) {
  return elements.size() + 3 + 1;
}

struct GraphFeatures {
  nk::Tensor nodes;       // [atoms, node_feature_width]
  std::vector<int> src;   // directed edges, both directions per bond
  std::vector<int> dst;
  nk::Tensor edges;       // [directed edges, 3] one-hot bond order
};

// Throws MoleculeError for elements outside the set or charges outside
// {-1,0,+1}.
GraphFeatures featurize(const Molecule& mol, const ElementSet& elements);

}  // namespace cfx::chem
