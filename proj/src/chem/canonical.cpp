#include "cfx/chem/canonical.hpp"

#include <algorithm>
#include <map>

#include "cfx/chem/smiles.hpp"

namespace cfx::chem {

namespace {

// Caps the number of complete individualization branches explored per key.
constexpr int kMaxLeaves = 512;

std::vector<int> dense_rank(const std::vector<std::vector<int>>& sig) {
  std::vector<std::vector<int>> sorted = sig;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> rank(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    rank[i] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), sig[i]) - sorted.begin());
  }
  return rank;
}

int class_count(const std::vector<int>& c) {
  return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

std::vector<int> refine(const Molecule& mol, std::vector<int> cls) {
  const std::size_t n = mol.atom_count();
  int count = class_count(cls);
  for (;;) {
    std::vector<std::vector<int>> sig(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int v = static_cast<int>(i);
      std::vector<std::pair<int, int>> nbs;
      for (const auto& nb : mol.neighbors(v)) nbs.emplace_back(nb.order, cls[static_cast<std::size_t>(nb.atom)]);
      std::sort(nbs.begin(), nbs.end());
      sig[i].push_back(cls[i]);
      for (const auto& [o, c] : nbs) {
        sig[i].push_back(o);
        sig[i].push_back(c);
      }
    }
    auto next = dense_rank(sig);
    const int next_count = class_count(next);
    cls = std::move(next);
    if (next_count == count) return cls;
    count = next_count;
  }
}

std::vector<int> initial_classes(const Molecule& mol) {
  const std::size_t n = mol.atom_count();
  std::vector<std::vector<int>> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = static_cast<int>(i);
    std::vector<int> orders;
    for (const auto& nb : mol.neighbors(v)) orders.push_back(nb.order);
    std::sort(orders.begin(), orders.end());
    sig[i] = {mol.atom(v).element, mol.atom(v).charge, mol.degree(v)};
    sig[i].insert(sig[i].end(), orders.begin(), orders.end());
  }
  return dense_rank(sig);
}

// Splits atom `v` out of its class: it precedes its former class mates.
std::vector<int> individualize(const std::vector<int>& cls, int v) {
  std::vector<std::vector<int>> sig(cls.size());
  for (std::size_t i = 0; i < cls.size(); ++i) {
    sig[i] = {cls[i], static_cast<int>(i) == v ? 0 : 1};
  }
  return dense_rank(sig);
}

// First (lowest) class with more than one member; -1 when discrete.
int first_tied_class(const std::vector<int>& cls) {
  std::map<int, int> counts;
  for (int c : cls) ++counts[c];
  for (const auto& [c, k] : counts)
    if (k > 1) return c;
  return -1;
}

void search(const Molecule& mol, const std::vector<int>& cls, int& leaves, std::string& best) {
  const int tied = first_tied_class(cls);
  if (tied < 0) {
    ++leaves;
    const int start = static_cast<int>(std::find(cls.begin(), cls.end(), 0) - cls.begin());
    std::string s = write_smiles_ordered(mol, cls, start);
    if (best.empty() || s < best) best = std::move(s);
    return;
  }
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (cls[i] != tied) continue;
    search(mol, refine(mol, individualize(cls, static_cast<int>(i))), leaves, best);
    if (leaves >= kMaxLeaves) return;
  }
}

}  // namespace

std::vector<int> refined_classes(const Molecule& mol) {
  return refine(mol, initial_classes(mol));
}

std::vector<int> canonical_ranks(const Molecule& mol) {
  std::vector<int> cls = refined_classes(mol);
  for (int tied = first_tied_class(cls); tied >= 0; tied = first_tied_class(cls)) {
    const int v = static_cast<int>(std::find(cls.begin(), cls.end(), tied) - cls.begin());
    cls = refine(mol, individualize(cls, v));
  }
  return cls;
}

std::string canonical_key(const Molecule& mol) {
  if (mol.empty()) throw MoleculeError("cannot key an empty molecule");
  if (!mol.connected()) throw MoleculeError("cannot key a disconnected molecule");
  int leaves = 0;
  std::string best;
  search(mol, refined_classes(mol), leaves, best);
  return best;
}

}  // namespace cfx::chem
