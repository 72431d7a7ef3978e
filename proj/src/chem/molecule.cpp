#include "cfx/chem/molecule.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <numeric>

namespace cfx::chem {

namespace {

struct ElementEntry {
  int number;
  std::string_view symbol;
};

constexpr std::array<ElementEntry, 36> kElements{{
    {1, "H"},   {3, "Li"},  {5, "B"},   {6, "C"},   {7, "N"},   {8, "O"},
    {9, "F"},   {11, "Na"}, {12, "Mg"}, {13, "Al"}, {14, "Si"}, {15, "P"},
    {16, "S"},  {17, "Cl"}, {19, "K"},  {20, "Ca"}, {25, "Mn"}, {26, "Fe"},
    {27, "Co"}, {28, "Ni"}, {29, "Cu"}, {30, "Zn"}, {33, "As"}, {34, "Se"},
    {35, "Br"}, {44, "Ru"}, {45, "Rh"}, {46, "Pd"}, {47, "Ag"}, {50, "Sn"},
    {51, "Sb"}, {53, "I"},  {78, "Pt"}, {79, "Au"}, {80, "Hg"}, {83, "Bi"},
}};

}  // namespace

std::optional<int> element_number(std::string_view symbol) {
  for (const auto& e : kElements)
    if (e.symbol == symbol) return e.number;
  return std::nullopt;
}

std::string_view element_symbol(int atomic_number) {
  for (const auto& e : kElements)
    if (e.number == atomic_number) return e.symbol;
  throw MoleculeError("no symbol for atomic number " + std::to_string(atomic_number));
}

int Molecule::add_atom(int element, int charge) {
  atoms_.push_back(Atom{element, charge});
  adj_.emplace_back();
  return static_cast<int>(atoms_.size()) - 1;
}

void Molecule::add_bond(int a, int b, int order) {
  const int n = static_cast<int>(atoms_.size());
  if (a < 0 || b < 0 || a >= n || b >= n) {
    throw MoleculeError("bond (" + std::to_string(a) + "," + std::to_string(b) +
                        ") out of range for " + std::to_string(n) + " atoms");
  }
  if (a == b) throw MoleculeError("self-loop on atom " + std::to_string(a));
  if (order < 1 || order > 3) throw MoleculeError("bond order " + std::to_string(order));
  if (bond_order(a, b) != 0) {
    throw MoleculeError("duplicate bond (" + std::to_string(a) + "," + std::to_string(b) + ")");
  }
  bonds_.push_back(Bond{a, b, order});
  adj_[static_cast<std::size_t>(a)].push_back(Neighbor{b, order});
  adj_[static_cast<std::size_t>(b)].push_back(Neighbor{a, order});
}

void Molecule::set_bond_order(int a, int b, int order) {
  if (order < 1 || order > 3) throw MoleculeError("bond order " + std::to_string(order));
  bool found = false;
  for (auto& bd : bonds_) {
    if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) {
      bd.order = order;
      found = true;
    }
  }
  if (!found) throw MoleculeError("no bond to modify");
  for (auto& nb : adj_[static_cast<std::size_t>(a)])
    if (nb.atom == b) nb.order = order;
  for (auto& nb : adj_[static_cast<std::size_t>(b)])
    if (nb.atom == a) nb.order = order;
}

void Molecule::remove_bond(int a, int b) {
  const auto before = bonds_.size();
  std::erase_if(bonds_, [&](const Bond& bd) {
    return (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a);
  });
  if (bonds_.size() == before) throw MoleculeError("no bond to remove");
  std::erase_if(adj_[static_cast<std::size_t>(a)], [&](const Neighbor& nb) { return nb.atom == b; });
  std::erase_if(adj_[static_cast<std::size_t>(b)], [&](const Neighbor& nb) { return nb.atom == a; });
}

void Molecule::remove_atom(int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= atoms_.size()) {
    throw MoleculeError("remove_atom index out of range");
  }
  Molecule out;
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (static_cast<int>(i) != index) out.add_atom(atoms_[i]);
  auto remap = [index](int i) { return i > index ? i - 1 : i; };
  for (const auto& bd : bonds_) {
    if (bd.a == index || bd.b == index) continue;
    out.add_bond(remap(bd.a), remap(bd.b), bd.order);
  }
  *this = std::move(out);
}

int Molecule::bond_order(int a, int b) const {
  for (const auto& nb : adj_[static_cast<std::size_t>(a)])
    if (nb.atom == b) return nb.order;
  return 0;
}

int Molecule::bond_order_sum(int i) const {
  int s = 0;
  for (const auto& nb : neighbors(i)) s += nb.order;
  return s;
}

std::vector<int> Molecule::components() const {
  std::vector<int> comp(atoms_.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < atoms_.size(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.assign(1, static_cast<int>(s));
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& nb : neighbors(v)) {
        if (comp[static_cast<std::size_t>(nb.atom)] < 0) {
          comp[static_cast<std::size_t>(nb.atom)] = next;
          stack.push_back(nb.atom);
        }
      }
    }
    ++next;
  }
  return comp;
}

bool Molecule::connected() const {
  const auto comp = components();
  return std::all_of(comp.begin(), comp.end(), [](int c) { return c == 0; });
}

Molecule Molecule::permuted(const std::vector<int>& perm) const {
  if (perm.size() != atoms_.size()) throw MoleculeError("permutation size mismatch");
  std::vector<Atom> atoms(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) atoms[static_cast<std::size_t>(perm[i])] = atoms_[i];
  Molecule out;
  for (const auto& a : atoms) out.add_atom(a);
  for (const auto& bd : bonds_) out.add_bond(perm[static_cast<std::size_t>(bd.a)], perm[static_cast<std::size_t>(bd.b)], bd.order);
  return out;
}

Molecule Molecule::induced(const std::vector<int>& atoms) const {
  Molecule out;
  std::vector<int> local(atoms_.size(), -1);
  for (int a : atoms) local[static_cast<std::size_t>(a)] = out.add_atom(atom(a));
  for (const auto& bd : bonds_) {
    const int la = local[static_cast<std::size_t>(bd.a)];
    const int lb = local[static_cast<std::size_t>(bd.b)];
    if (la >= 0 && lb >= 0) out.add_bond(la, lb, bd.order);
  }
  return out;
}

namespace {

// Per-atom invariant used to prune isomorphism candidates.
std::vector<std::vector<int>> local_invariants(const Molecule& m) {
  std::vector<std::vector<int>> inv(m.atom_count());
  for (std::size_t i = 0; i < m.atom_count(); ++i) {
    const int v = static_cast<int>(i);
    std::vector<int> orders;
    for (const auto& nb : m.neighbors(v)) orders.push_back(nb.order);
    std::sort(orders.begin(), orders.end());
    inv[i] = {m.atom(v).element, m.atom(v).charge, m.degree(v)};
    inv[i].insert(inv[i].end(), orders.begin(), orders.end());
  }
  return inv;
}

}  // namespace

bool isomorphic(const Molecule& a, const Molecule& b) {
  if (a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count()) return false;
  const std::size_t n = a.atom_count();
  if (n == 0) return true;
  auto ia = local_invariants(a);
  auto ib = local_invariants(b);
  {
    auto sa = ia, sb = ib;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  // Visit atoms of `a` in BFS order per component so most candidates are
  // constrained by an already-mapped neighbor.
  std::vector<int> order;
  std::vector<bool> seen(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    seen[s] = true;
    std::size_t head = order.size();
    order.push_back(static_cast<int>(s));
    while (head < order.size()) {
      const int v = order[head++];
      for (const auto& nb : a.neighbors(v)) {
        if (!seen[static_cast<std::size_t>(nb.atom)]) {
          seen[static_cast<std::size_t>(nb.atom)] = true;
          order.push_back(nb.atom);
        }
      }
    }
  }
  std::vector<int> map_ab(n, -1), map_ba(n, -1);
  std::function<bool(std::size_t)> extend = [&](std::size_t depth) -> bool {
    if (depth == n) return true;
    const int u = order[depth];
    for (std::size_t c = 0; c < n; ++c) {
      const int w = static_cast<int>(c);
      if (map_ba[c] >= 0 || ia[static_cast<std::size_t>(u)] != ib[c]) continue;
      bool ok = true;
      for (const auto& nb : a.neighbors(u)) {
        const int mapped = map_ab[static_cast<std::size_t>(nb.atom)];
        if (mapped >= 0 && b.bond_order(w, mapped) != nb.order) {
          ok = false;
          break;
        }
      }
      if (ok) {
        // mapped neighbors of w must be neighbors of u
        for (const auto& nb : b.neighbors(w)) {
          const int back = map_ba[static_cast<std::size_t>(nb.atom)];
          if (back >= 0 && a.bond_order(u, back) != nb.order) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;
      map_ab[static_cast<std::size_t>(u)] = w;
      map_ba[c] = u;
      if (extend(depth + 1)) return true;
      map_ab[static_cast<std::size_t>(u)] = -1;
      map_ba[c] = -1;
    }
    return false;
  };
  return extend(0);
}

}  // namespace cfx::chem
