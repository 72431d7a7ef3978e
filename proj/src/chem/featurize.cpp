#include "cfx/chem/featurize.hpp"

#include <algorithm>

namespace cfx::chem {

ElementSet::ElementSet() : elements_{6, 7, 8, 16, 15, 9, 17, 35, 53} {}

ElementSet::ElementSet(std::vector<int> atomic_numbers) : elements_(std::move(atomic_numbers)) {
  auto sorted = elements_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw MoleculeError("duplicate element in element set");
  }
}

ElementSet ElementSet::from_symbols(const std::vector<std::string>& symbols) {
  std::vector<int> nums;
  for (const auto& s : symbols) {
    const auto n = element_number(s);
    if (!n) throw MoleculeError("unknown element symbol '" + s + "'");
    nums.push_back(*n);
  }
  return ElementSet(std::move(nums));
}

int ElementSet::index_of(int atomic_number) const {
  auto it = std::find(elements_.begin(), elements_.end(), atomic_number);
  return it == elements_.end() ? -1 : static_cast<int>(it - elements_.begin());
}

std::vector<std::string> ElementSet::symbols() const {
  std::vector<std::string> out;
  for (int e : elements_) out.emplace_back(element_symbol(e));
  return out;
}

GraphFeatures featurize(const Molecule& mol, const ElementSet& elements) {
  const std::size_t n = mol.atom_count();
  const std::size_t width = node_feature_width(elements);
  GraphFeatures f;
  f.nodes = nk::Tensor::matrix(n, width);
  for (std::size_t i = 0; i < n; ++i) {
    const Atom& a = mol.atom(static_cast<int>(i));
    const int e = elements.index_of(a.element);
    if (e < 0) {
      throw MoleculeError("element " + std::string(element_symbol(a.element)) +
                          " is outside the configured element set");
    }
    if (a.charge < -1 || a.charge > 1) {
      throw MoleculeError("formal charge " + std::to_string(a.charge) + " cannot be featurized");
    }
    f.nodes.at(i, static_cast<std::size_t>(e)) = 1.0;
    f.nodes.at(i, elements.size() + static_cast<std::size_t>(a.charge + 1)) = 1.0;
    f.nodes.at(i, elements.size() + 3) = mol.degree(static_cast<int>(i)) / 4.0;
  }
  const auto& bonds = mol.bonds();
  f.edges = nk::Tensor::matrix(2 * bonds.size(), kBondFeatures);
  for (std::size_t k = 0; k < bonds.size(); ++k) {
    const auto& b = bonds[k];
    f.src.push_back(b.a);
    f.dst.push_back(b.b);
    f.src.push_back(b.b);
    f.dst.push_back(b.a);
    f.edges.at(2 * k, static_cast<std::size_t>(b.order - 1)) = 1.0;
    f.edges.at(2 * k + 1, static_cast<std::size_t>(b.order - 1)) = 1.0;
  }
  return f;
}

}  // namespace cfx::chem
