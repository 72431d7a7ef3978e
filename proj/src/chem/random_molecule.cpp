#include "cfx/chem/random_molecule.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

#include "cfx/chem/validity.hpp"

namespace cfx::chem {

namespace {

int free_valence(const Molecule& m, int v) {
  const auto& a = m.atom(v);
  return max_valence(a.element, a.charge) - m.bond_order_sum(v);
}

int pick_element(nk::Rng& rng, const RandomMoleculeOptions& o) {
  double total = 0.0;
  for (const auto& [_, w] : o.element_weights) total += w;
  double r = rng.uniform() * total;
  for (const auto& [e, w] : o.element_weights) {
    if (r < w) return e;
    r -= w;
  }
  return o.element_weights.back().first;
}

std::vector<int> bfs_distances(const Molecule& m, int s) {
  std::vector<int> dist(m.atom_count(), -1);
  std::queue<int> q;
  dist[static_cast<std::size_t>(s)] = 0;
  q.push(s);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& nb : m.neighbors(v)) {
      if (dist[static_cast<std::size_t>(nb.atom)] < 0) {
        dist[static_cast<std::size_t>(nb.atom)] = dist[static_cast<std::size_t>(v)] + 1;
        q.push(nb.atom);
      }
    }
  }
  return dist;
}

}  // namespace

Molecule random_molecule(nk::Rng& rng, const RandomMoleculeOptions& o) {
  const int target =
      o.min_atoms + static_cast<int>(rng.below(static_cast<std::size_t>(o.max_atoms - o.min_atoms + 1)));
  Molecule m;
  m.add_atom(6);
  while (static_cast<int>(m.atom_count()) < target) {
    std::vector<int> open;
    for (int v = 0; v < static_cast<int>(m.atom_count()); ++v)
      if (free_valence(m, v) >= 1 && m.degree(v) < 4) open.push_back(v);
    if (open.empty()) break;
    const int anchor = open[rng.below(open.size())];
    const int element = pick_element(rng, o);
    const int new_max = max_valence(element, 0);
    int order = 1;
    const double r = rng.uniform();
    if (r < o.triple_bond_prob) {
      order = 3;
    } else if (r < o.triple_bond_prob + o.double_bond_prob) {
      order = 2;
    }
    order = std::min({order, free_valence(m, anchor), new_max});
    if (order < 1) continue;
    const int v = m.add_atom(element);
    m.add_bond(anchor, v, order);
    if (element == 7 && o.zwitterion_prob > 0.0 && rng.bernoulli(o.zwitterion_prob) &&
        static_cast<int>(m.atom_count()) + 1 <= o.max_atoms && order == 1) {
      m.atom(v).charge = 1;
      const int ox = m.add_atom(8, -1);
      m.add_bond(v, ox, 1);
    }
  }
  // Ring closures between atoms 4-5 bonds apart (5- and 6-membered rings).
  int closures = 0;
  double budget = o.ring_closures;
  while (budget > 0.0 && rng.uniform() < std::min(1.0, budget)) {
    budget -= 1.0;
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < static_cast<int>(m.atom_count()); ++a) {
      if (free_valence(m, a) < 1 || m.degree(a) >= 3) continue;
      const auto dist = bfs_distances(m, a);
      for (int b = a + 1; b < static_cast<int>(m.atom_count()); ++b) {
        const int d = dist[static_cast<std::size_t>(b)];
        if ((d == 4 || d == 5) && free_valence(m, b) >= 1 && m.degree(b) < 3) pairs.emplace_back(a, b);
      }
    }
    if (pairs.empty()) break;
    const auto [a, b] = pairs[rng.below(pairs.size())];
    m.add_bond(a, b, 1);
    ++closures;
  }
  return m;
}

std::vector<int> random_permutation(nk::Rng& rng, std::size_t n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace cfx::chem
