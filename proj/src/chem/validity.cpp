#include "cfx/chem/validity.hpp"

#include <algorithm>

namespace cfx::chem {

std::vector<int> allowed_valences(int element, int charge) {
  if (charge == 0) {
    switch (element) {
      case 5: return {3};
      case 6: return {4};
      case 7: return {3};
      case 8: return {2};
      case 9:
      case 17:
      case 35:
      case 53: return {1};
      case 15: return {3, 5};
      case 16: return {2, 4, 6};
      default: return {};
    }
  }
  if (charge == 1) {
    if (element == 7) return {4};
    if (element == 15) return {4, 6};
  }
  if (charge == -1) {
    if (element == 8) return {1};
    if (element == 16) return {1, 3, 5};
  }
  return {};
}

int max_valence(int element, int charge) {
  const auto v = allowed_valences(element, charge);
  return v.empty() ? -1 : v.back();
}

int implicit_hydrogens(const Molecule& mol, int atom) {
  const auto& a = mol.atom(atom);
  const int used = mol.bond_order_sum(atom);
  for (int v : allowed_valences(a.element, a.charge))
    if (v >= used) return v - used;
  return 0;
}

ValidityReport check_validity(const Molecule& mol) {
  ValidityReport report;
  if (mol.empty()) {
    report.violations.push_back({-1, "empty", "molecule has no atoms"});
  }
  for (std::size_t i = 0; i < mol.atom_count(); ++i) {
    const int v = static_cast<int>(i);
    const auto& a = mol.atom(v);
    const int maxv = max_valence(a.element, a.charge);
    if (maxv < 0) {
      std::string sym;
      try {
        sym = std::string(element_symbol(a.element));
      } catch (const MoleculeError&) {
        sym = "#" + std::to_string(a.element);
      }
      report.violations.push_back(
          {v, "element", sym + " with charge " + std::to_string(a.charge) + " is not supported"});
      continue;
    }
    const int used = mol.bond_order_sum(v);
    if (used > maxv) {
      report.violations.push_back({v, "valence",
                                   "bond order sum " + std::to_string(used) +
                                       " exceeds " + std::to_string(maxv)});
    }
  }
  if (!mol.empty() && !mol.connected()) {
    report.violations.push_back({-1, "connectivity", "molecule is disconnected"});
  }
  report.valid = report.violations.empty();
  return report;
}

}  // namespace cfx::chem
