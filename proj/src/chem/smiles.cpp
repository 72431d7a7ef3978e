#include "cfx/chem/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>

#include "cfx/chem/validity.hpp"

namespace cfx::chem {

namespace {

bool is_organic(int element) {
  switch (element) {
    case 5: case 6: case 7: case 8: case 9: case 15: case 16: case 17: case 35: case 53:
      return true;
    default:
      return false;
  }
}

struct RingOpen {
  int atom;
  int order;  // 0 = unspecified
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Molecule run() {
    while (pos_ < s_.size()) step();
    if (!rings_.empty()) {
      const auto& [num, open] = *rings_.begin();
      throw SmilesError(open.offset, "unclosed ring " + std::to_string(num));
    }
    if (!branches_.empty()) throw SmilesError(branch_offsets_.back(), "unclosed branch");
    if (pending_ != 0) throw SmilesError(pending_offset_, "dangling bond");
    if (mol_.empty()) throw SmilesError(0, "empty SMILES");
    return std::move(mol_);
  }

 private:
  void step() {
    const char c = s_[pos_];
    switch (c) {
      case '-': set_bond(1); return;
      case '=': set_bond(2); return;
      case '#': set_bond(3); return;
      case '(':
        if (prev_ < 0) throw SmilesError(pos_, "branch without a preceding atom");
        if (pending_ != 0) throw SmilesError(pos_, "bond before branch");
        branches_.push_back(prev_);
        branch_offsets_.push_back(pos_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) throw SmilesError(pos_, "unmatched ')'");
        if (pending_ != 0) throw SmilesError(pos_, "dangling bond");
        prev_ = branches_.back();
        branches_.pop_back();
        branch_offsets_.pop_back();
        ++pos_;
        return;
      case '%': {
        if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
          throw SmilesError(pos_, "malformed %nn ring closure");
        }
        const int num = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
        ring(num, pos_);
        pos_ += 3;
        return;
      }
      case '[': bracket(); return;
      case '.': throw SmilesError(pos_, "disconnected SMILES ('.') not supported");
      case '@': case '/': case '\\': throw SmilesError(pos_, "stereo mark not supported");
      case ':': throw SmilesError(pos_, "aromatic bond not supported");
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring(c - '0', pos_);
      ++pos_;
      return;
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      throw SmilesError(pos_, std::string("aromatic atom '") + c + "' not supported");
    }
    if (std::isupper(static_cast<unsigned char>(c))) {
      organic();
      return;
    }
    throw SmilesError(pos_, std::string("unexpected character '") + c + "'");
  }

  void set_bond(int order) {
    if (pending_ != 0) throw SmilesError(pos_, "consecutive bond symbols");
    if (prev_ < 0) throw SmilesError(pos_, "bond without a preceding atom");
    pending_ = order;
    pending_offset_ = pos_;
    ++pos_;
  }

  void ring(int num, std::size_t offset) {
    if (prev_ < 0) throw SmilesError(offset, "ring closure without a preceding atom");
    auto it = rings_.find(num);
    if (it == rings_.end()) {
      rings_[num] = RingOpen{prev_, pending_, offset};
    } else {
      const RingOpen open = it->second;
      rings_.erase(it);
      if (open.order != 0 && pending_ != 0 && open.order != pending_) {
        throw SmilesError(offset, "conflicting ring bond orders for ring " + std::to_string(num));
      }
      const int order = pending_ != 0 ? pending_ : (open.order != 0 ? open.order : 1);
      if (open.atom == prev_) throw SmilesError(offset, "ring closure to the same atom");
      if (mol_.bond_order(open.atom, prev_) != 0) {
        throw SmilesError(offset, "ring closure duplicates an existing bond");
      }
      mol_.add_bond(open.atom, prev_, order);
    }
    pending_ = 0;
  }

  void attach(int element, int charge, std::size_t offset) {
    const int idx = mol_.add_atom(element, charge);
    if (prev_ >= 0) {
      mol_.add_bond(prev_, idx, pending_ != 0 ? pending_ : 1);
    } else if (pending_ != 0) {
      throw SmilesError(offset, "bond without a preceding atom");
    }
    pending_ = 0;
    prev_ = idx;
  }

  void organic() {
    const std::size_t start = pos_;
    std::string sym(1, s_[pos_]);
    if (pos_ + 1 < s_.size()) {
      const std::string two = sym + s_[pos_ + 1];
      if (two == "Cl" || two == "Br") sym = two;
    }
    const auto num = element_number(sym);
    if (!num || !is_organic(*num)) {
      throw SmilesError(start, "unknown element '" + sym + "' outside brackets");
    }
    pos_ += sym.size();
    attach(*num, 0, start);
  }

  void bracket() {
    const std::size_t start = pos_;
    ++pos_;
    auto peek = [&]() -> char { return pos_ < s_.size() ? s_[pos_] : '\0'; };
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      throw SmilesError(pos_, "isotopes not supported");
    }
    if (std::islower(static_cast<unsigned char>(peek()))) {
      throw SmilesError(pos_, "aromatic atom not supported");
    }
    if (!std::isupper(static_cast<unsigned char>(peek()))) {
      throw SmilesError(pos_, "expected element symbol");
    }
    std::string sym(1, s_[pos_++]);
    if (std::islower(static_cast<unsigned char>(peek()))) {
      const std::string two = sym + peek();
      if (element_number(two)) {
        sym = two;
        ++pos_;
      }
    }
    const auto num = element_number(sym);
    if (!num) throw SmilesError(start + 1, "unknown element '" + sym + "'");
    if (peek() == '@') throw SmilesError(pos_, "stereo mark not supported");
    if (peek() == 'H') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    int charge = 0;
    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      const int unit = sign == '+' ? 1 : -1;
      ++pos_;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        int mag = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) mag = mag * 10 + (s_[pos_++] - '0');
        charge = unit * mag;
      } else {
        charge = unit;
        while (peek() == sign) {
          charge += unit;
          ++pos_;
        }
      }
    }
    if (peek() == ':') throw SmilesError(pos_, "atom classes not supported");
    if (peek() != ']') throw SmilesError(pos_, "unclosed bracket atom");
    ++pos_;
    attach(*num, charge, start);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  Molecule mol_;
  int prev_ = -1;
  int pending_ = 0;
  std::size_t pending_offset_ = 0;
  std::vector<int> branches_;
  std::vector<std::size_t> branch_offsets_;
  std::map<int, RingOpen> rings_;
};

std::string atom_text(const Molecule& mol, int v) {
  const Atom& a = mol.atom(v);
  const std::string sym(element_symbol(a.element));
  if (a.charge == 0 && is_organic(a.element)) return sym;
  std::string out = "[" + sym;
  const int h = implicit_hydrogens(mol, v);
  if (h == 1) out += "H";
  if (h > 1) out += "H" + std::to_string(h);
  if (a.charge > 0) out += "+";
  if (a.charge < 0) out += "-";
  if (std::abs(a.charge) > 1) out += std::to_string(std::abs(a.charge));
  return out + "]";
}

const char* bond_text(int order) {
  switch (order) {
    case 2: return "=";
    case 3: return "#";
    default: return "";
  }
}

std::string ring_label(int d) {
  if (d < 10) return std::to_string(d);
  return "%" + std::to_string(d);
}

}  // namespace

Molecule parse_smiles(std::string_view text) { return Parser(text).run(); }

std::string write_smiles_ordered(const Molecule& mol, const std::vector<int>& priority,
                                 int start) {
  if (mol.empty()) throw MoleculeError("cannot write SMILES for an empty molecule");
  if (!mol.connected()) throw MoleculeError("cannot write SMILES for a disconnected molecule");
  const std::size_t n = mol.atom_count();

  // Pass 1: DFS spanning tree and ring-closure edges.
  std::vector<std::vector<int>> children(n);
  std::vector<int> parent(n, -1);
  std::vector<bool> visited(n, false);
  // closures[v]: ring bonds attached at v, as (partner, order, opens_here)
  struct Closure {
    int partner;
    int order;
    bool opens;
    int id;
  };
  std::vector<std::vector<Closure>> closures(n);
  std::set<std::pair<int, int>> closed;
  int closure_ids = 0;

  auto sorted_neighbors = [&](int v) {
    std::vector<Neighbor> nbs = mol.neighbors(v);
    std::sort(nbs.begin(), nbs.end(), [&](const Neighbor& x, const Neighbor& y) {
      const int px = priority[static_cast<std::size_t>(x.atom)];
      const int py = priority[static_cast<std::size_t>(y.atom)];
      return px != py ? px < py : x.atom < y.atom;
    });
    return nbs;
  };

  std::function<void(int)> dfs = [&](int v) {
    visited[static_cast<std::size_t>(v)] = true;
    for (const auto& nb : sorted_neighbors(v)) {
      const int w = nb.atom;
      if (w == parent[static_cast<std::size_t>(v)]) continue;
      const auto key = std::minmax(v, w);
      if (visited[static_cast<std::size_t>(w)]) {
        if (closed.count(key)) continue;
        closed.insert(key);
        // w was written earlier: the ring opens at w and closes at v.
        const int id = closure_ids++;
        closures[static_cast<std::size_t>(w)].push_back({v, nb.order, true, id});
        closures[static_cast<std::size_t>(v)].push_back({w, nb.order, false, id});
        continue;
      }
      parent[static_cast<std::size_t>(w)] = v;
      children[static_cast<std::size_t>(v)].push_back(w);
      dfs(w);
    }
  };
  dfs(start);

  // Pass 2: emit, allocating the lowest free ring digit at each opening.
  std::string out;
  std::vector<int> digit_of(static_cast<std::size_t>(closure_ids), -1);
  std::set<int> in_use;
  std::function<void(int)> emit = [&](int v) {
    out += atom_text(mol, v);
    auto& cl = closures[static_cast<std::size_t>(v)];
    std::vector<int> to_free;
    // closings first in the order their rings were opened
    std::vector<Closure> closings, openings;
    for (const auto& c : cl) (c.opens ? openings : closings).push_back(c);
    std::sort(closings.begin(), closings.end(), [&](const Closure& a, const Closure& b) {
      return digit_of[static_cast<std::size_t>(a.id)] < digit_of[static_cast<std::size_t>(b.id)];
    });
    for (const auto& c : closings) {
      const int d = digit_of[static_cast<std::size_t>(c.id)];
      out += ring_label(d);
      to_free.push_back(d);
    }
    for (const auto& c : openings) {
      int d = 1;
      while (in_use.count(d)) ++d;
      in_use.insert(d);
      digit_of[static_cast<std::size_t>(c.id)] = d;
      out += bond_text(c.order);
      out += ring_label(d);
    }
    for (int d : to_free) in_use.erase(d);
    const auto& ch = children[static_cast<std::size_t>(v)];
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const std::string b = bond_text(mol.bond_order(v, ch[i]));
      if (i + 1 < ch.size()) {
        out += "(" + b;
        emit(ch[i]);
        out += ")";
      } else {
        out += b;
        emit(ch[i]);
      }
    }
  };
  emit(start);
  return out;
}

std::string write_smiles(const Molecule& mol) {
  std::vector<int> priority(mol.atom_count());
  for (std::size_t i = 0; i < priority.size(); ++i) priority[i] = static_cast<int>(i);
  return write_smiles_ordered(mol, priority, 0);
}

}  // namespace cfx::chem
