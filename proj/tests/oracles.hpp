#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <limits>
#include <vector>

#include "cfx/chem/validity.hpp"
#include "cfx/explain/metrics.hpp"
#include "cfx/fp/fingerprint.hpp"

namespace oracle {

// Tanimoto distance by walking individual bits.
inline double distance(const cfx::fp::Fingerprint& a, const cfx::fp::Fingerprint& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.nbits(); ++i) {
    inter += (a.test(i) && b.test(i)) ? 1 : 0;
    uni += (a.test(i) || b.test(i)) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

struct Metrics {
  double coverage;
  double cost;
};

inline Metrics metrics(const std::vector<cfx::fp::Fingerprint>& set, const std::vector<cfx::fp::Fingerprint>& inputs,
                       double delta) {
  std::vector<std::vector<double>> d(inputs.size(), std::vector<double>(set.size()));
  for (std::size_t g = 0; g < inputs.size(); ++g)
    for (std::size_t c = 0; c < set.size(); ++c) d[g][c] = distance(inputs[g], set[c]);
  std::size_t hit = 0;
  double sum = 0.0;
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : d[g]) m = std::min(m, x);
    hit += m <= delta ? 1 : 0;
    sum += m;
  }
  return {set.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(inputs.size()),
          sum / static_cast<double>(inputs.size())};
}

// Best set objective over all subsets of at most k candidates.
inline double best_subset(const std::vector<cfx::explain::CandidateScore>& cands, std::size_t k, std::size_t inputs,
                          const cfx::explain::ScoreWeights& w) {
  double best = 0.0;
  const std::size_t n = cands.size();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) chosen.push_back(i);
    if (chosen.size() > k) continue;
    best = std::max(best, cfx::explain::set_objective(cands, chosen, inputs, w));
  }
  return best;
}

// Valence-sum validity over C/N/O with neutral atoms: bond-order sums within
// {4, 3, 2} and a single connected component.
inline bool valence_valid(const std::vector<int>& elements, const std::vector<std::vector<int>>& order) {
  const std::size_t n = elements.size();
  for (std::size_t i = 0; i < n; ++i) {
    int s = 0;
    for (std::size_t j = 0; j < n; ++j) s += order[i][j];
    const int cap = elements[i] == 6 ? 4 : elements[i] == 7 ? 3 : 2;
    if (s > cap) return false;
  }
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (order[i][j]) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
  for (std::size_t i = 0; i < n; ++i)
    if (find(static_cast<int>(i)) != find(0)) return false;
  return true;
}

struct Sweep {
  long checked = 0;
  long disagreements = 0;
};

// Every labeled graph on 1..4 atoms over {C, N, O} with bond orders {0, 1, 2}.
inline Sweep validity_sweep() {
  const int elems[3] = {6, 7, 8};
  Sweep out;
  for (int n = 1; n <= 4; ++n) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    int elem_combos = 1, bond_combos = 1;
    for (int i = 0; i < n; ++i) elem_combos *= 3;
    for (std::size_t k = 0; k < pairs.size(); ++k) bond_combos *= 3;
    for (int ec = 0; ec < elem_combos; ++ec) {
      std::vector<int> el(static_cast<std::size_t>(n));
      for (int i = 0, c = ec; i < n; ++i, c /= 3) el[static_cast<std::size_t>(i)] = elems[c % 3];
      for (int bc = 0; bc < bond_combos; ++bc) {
        std::vector<std::vector<int>> order(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), 0));
        cfx::chem::Molecule m;
        for (int e : el) m.add_atom(e);
        for (std::size_t k = 0, c = static_cast<std::size_t>(bc); k < pairs.size(); ++k, c /= 3) {
          const int o = static_cast<int>(c % 3);
          if (!o) continue;
          const auto [a, b] = pairs[k];
          order[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = order[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = o;
          m.add_bond(a, b, o);
        }
        ++out.checked;
        if (cfx::chem::is_valid(m) != valence_valid(el, order)) ++out.disagreements;
      }
    }
  }
  return out;
}

}  // namespace oracle
