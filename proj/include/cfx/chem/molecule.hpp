#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfx::chem {

class MoleculeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Atomic number for a symbol, or nullopt when the symbol is not in the table.
std::optional<int> element_number(std::string_view symbol);
std::string_view element_symbol(int atomic_number);

struct Atom {
  int element = 6;  // atomic number
  int charge = 0;
  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Bond {
  int a = 0;
  int b = 0;
  int order = 1;
};

struct Neighbor {
  int atom;
  int order;
};

// Simple attributed graph of heavy atoms. Hydrogen counts are derived from
// the valence model in validity.hpp and never stored.
class Molecule {
 public:
  int add_atom(int element, int charge = 0);
  int add_atom(const Atom& atom) { return add_atom(atom.element, atom.charge); }
  // Rejects self-loops, duplicate pairs, out-of-range indices and orders
  // outside {1,2,3}.
  void add_bond(int a, int b, int order);
  void set_bond_order(int a, int b, int order);
  void remove_bond(int a, int b);
  // Removes an atom and its bonds; higher indices shift down by one.
  void remove_atom(int index);

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  bool empty() const { return atoms_.empty(); }

  const Atom& atom(int i) const { return atoms_[static_cast<std::size_t>(i)]; }
  Atom& atom(int i) { return atoms_[static_cast<std::size_t>(i)]; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<Neighbor>& neighbors(int i) const { return adj_[static_cast<std::size_t>(i)]; }

  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  // 0 when not bonded.
  int bond_order(int a, int b) const;
  int bond_order_sum(int i) const;

  bool connected() const;
  // Component id per atom, numbered in order of first appearance.
  std::vector<int> components() const;

  // Same atom/bond lists with atom i moved to position perm[i].
  Molecule permuted(const std::vector<int>& perm) const;
  // Induced subgraph on `atoms`, in the given order.
  Molecule induced(const std::vector<int>& atoms) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adj_;
};

// Exact check that two molecules are the same labelled graph up to atom
// renumbering (element, charge, bond order). Backtracking; intended for
// small molecules and tests.
bool isomorphic(const Molecule& a, const Molecule& b);

}  // namespace cfx::chem
