#include "cfx/fragvocab/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cfx/chem/canonical.hpp"
#include "cfx/chem/smiles.hpp"
#include "json.hpp"

namespace cfx::fragvocab {

FragmentVocab::FragmentVocab(std::vector<Fragment> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    if (e.id != static_cast<int>(i)) throw VocabError("vocabulary ids must be 0..n-1 in order");
    if (e.frequency == 0) throw VocabError("fragment " + e.key + " has zero frequency");
    if (!by_key_.emplace(e.key, e.id).second) throw VocabError("duplicate fragment " + e.key);
  }
}

int FragmentVocab::find(const std::string& key) const {
  auto it = by_key_.find(key);
  return it == by_key_.end() ? -1 : it->second;
}

int FragmentVocab::single_atom(const chem::Atom& atom) const {
  chem::Molecule m;
  m.add_atom(atom);
  return find(chem::canonical_key(m));
}

std::size_t FragmentVocab::max_fragment_atoms() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n = std::max(n, e.pattern.atom_count());
  return n;
}

std::string FragmentVocab::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries_)
    out.push_back({{"smiles", e.key}, {"frequency", e.frequency}, {"id", e.id}});
  return out.dump(1);
}

FragmentVocab FragmentVocab::from_json(const std::string& text) {
  nlohmann::json in;
  try {
    in = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw VocabError(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  if (!in.is_array()) throw VocabError("vocabulary must be a JSON list");
  std::vector<Fragment> entries;
  for (const auto& row : in) {
    Fragment f;
    try {
      f.key = row.at("smiles").get<std::string>();
      f.frequency = row.at("frequency").get<std::size_t>();
      f.id = row.at("id").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw VocabError(std::string("malformed vocabulary entry: ") + e.what());
    }
    f.pattern = chem::parse_smiles(f.key);
    if (chem::canonical_key(f.pattern) != f.key) throw VocabError("non-canonical fragment " + f.key);
    entries.push_back(std::move(f));
  }
  return FragmentVocab(std::move(entries));
}

void FragmentVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VocabError("cannot write " + path.string());
  out << to_json() << '\n';
}

FragmentVocab FragmentVocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw VocabError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

// Fragment state of one corpus molecule during mining.
struct MiningState {
  const chem::Molecule* mol;
  std::vector<int> frag_of;
  std::map<int, std::vector<int>> frags;
  std::map<std::pair<int, int>, std::string> pairs;
  int next_id = 0;
};

std::set<int> neighbor_frags(const MiningState& s, int f) {
  std::set<int> out;
  for (int a : s.frags.at(f))
    for (const auto& nb : s.mol->neighbors(a))
      if (s.frag_of[nb.atom] != f) out.insert(s.frag_of[nb.atom]);
  return out;
}

std::vector<int> merged_atoms(const MiningState& s, int f, int g) {
  std::vector<int> atoms = s.frags.at(f);
  const auto& other = s.frags.at(g);
  atoms.insert(atoms.end(), other.begin(), other.end());
  std::sort(atoms.begin(), atoms.end());
  return atoms;
}

void add_pair(MiningState& s, int f, int g, std::size_t max_atoms,
              std::unordered_map<std::string, std::size_t>& counts) {
  const auto key = std::minmax(f, g);
  if (s.pairs.count(key)) return;
  if (s.frags.at(f).size() + s.frags.at(g).size() > max_atoms) return;
  auto k = chem::canonical_key(s.mol->induced(merged_atoms(s, f, g)));
  ++counts[k];
  s.pairs.emplace(key, std::move(k));
}

void drop_pairs_of(MiningState& s, int f, std::unordered_map<std::string, std::size_t>& counts) {
  for (int g : neighbor_frags(s, f)) {
    auto it = s.pairs.find(std::minmax(f, g));
    if (it == s.pairs.end()) continue;
    auto c = counts.find(it->second);
    if (--c->second == 0) counts.erase(c);
    s.pairs.erase(it);
  }
}

}  // namespace

FragmentVocab mine_vocab(const std::vector<chem::Molecule>& corpus, std::size_t target_size,
                         std::size_t max_atoms) {
  if (corpus.empty()) throw VocabError("mine_vocab: empty corpus");

  std::map<std::string, std::size_t> singles;
  for (const auto& m : corpus) {
    if (m.empty()) throw VocabError("mine_vocab: empty molecule in corpus");
    for (const auto& a : m.atoms()) {
      chem::Molecule one;
      one.add_atom(a);
      ++singles[chem::canonical_key(one)];
    }
  }
  if (target_size < singles.size()) {
    throw VocabError("target size " + std::to_string(target_size) + " is below the " +
                     std::to_string(singles.size()) + " atom types in the corpus");
  }
  std::vector<Fragment> entries;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [key, freq] : singles) {
    index[key] = entries.size();
    entries.push_back({chem::parse_smiles(key), key, freq, static_cast<int>(entries.size())});
  }

  std::vector<MiningState> states;
  std::unordered_map<std::string, std::size_t> counts;
  states.reserve(corpus.size());
  for (const auto& m : corpus) {
    MiningState s{&m, {}, {}, {}, 0};
    for (int a = 0; a < static_cast<int>(m.atom_count()); ++a) {
      s.frag_of.push_back(a);
      s.frags[a] = {a};
    }
    s.next_id = static_cast<int>(m.atom_count());
    for (const auto& b : m.bonds()) add_pair(s, b.a, b.b, max_atoms, counts);
    states.push_back(std::move(s));
  }

  while (entries.size() < target_size) {
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [k, c] : counts) {
      if (index.count(k)) continue;
      if (c > best_count || (c == best_count && k < *best)) {
        best = &k;
        best_count = c;
      }
    }
    if (!best) break;
    const std::string chosen = *best;
    std::size_t merged = 0;
    for (auto& s : states) {
      std::vector<std::pair<int, int>> picks;
      std::set<int> used;
      for (const auto& [fg, k] : s.pairs) {
        if (k != chosen || used.count(fg.first) || used.count(fg.second)) continue;
        picks.push_back(fg);
        used.insert(fg.first);
        used.insert(fg.second);
      }
      std::vector<int> created;
      for (auto [f, g] : picks) {
        drop_pairs_of(s, f, counts);
        drop_pairs_of(s, g, counts);
        const int id = s.next_id++;
        auto atoms = merged_atoms(s, f, g);
        for (int a : atoms) s.frag_of[a] = id;
        s.frags.erase(f);
        s.frags.erase(g);
        s.frags[id] = std::move(atoms);
        created.push_back(id);
      }
      for (int id : created)
        for (int g : neighbor_frags(s, id)) add_pair(s, id, g, max_atoms, counts);
      merged += picks.size();
    }
    index[chosen] = entries.size();
    entries.push_back({chem::parse_smiles(chosen), chosen, merged, static_cast<int>(entries.size())});
  }
  return FragmentVocab(std::move(entries));
}

namespace {

// Backtracking induced-subgraph search over unassigned molecule atoms.
class Matcher {
 public:
  Matcher(const chem::Molecule& mol, const chem::Molecule& pattern, const std::vector<char>& taken)
      : mol_(mol), pat_(pattern), taken_(taken) {
    const int n = static_cast<int>(pat_.atom_count());
    std::vector<char> seen(n, 0);
    order_.push_back(0);
    parent_.push_back(-1);
    seen[0] = 1;
    for (std::size_t i = 0; i < order_.size(); ++i) {
      for (const auto& nb : pat_.neighbors(order_[i])) {
        if (seen[nb.atom]) continue;
        seen[nb.atom] = 1;
        order_.push_back(nb.atom);
        parent_.push_back(order_[i]);
      }
    }
    map_.assign(n, -1);
  }

  bool find(std::vector<int>& out) {
    if (!extend(0)) return false;
    out = map_;
    return true;
  }

 private:
  bool feasible(int p, int m) const {
    if (taken_[m] || !(mol_.atom(m) == pat_.atom(p))) return false;
    if (mol_.degree(m) < pat_.degree(p)) return false;
    for (std::size_t i = 0; i < map_.size(); ++i) {
      if (map_[i] < 0) continue;
      if (map_[i] == m) return false;
      if (pat_.bond_order(p, static_cast<int>(i)) != mol_.bond_order(m, map_[i])) return false;
    }
    return true;
  }

  bool extend(std::size_t depth) {
    if (depth == order_.size()) return true;
    const int p = order_[depth];
    std::vector<int> cands;
    if (parent_[depth] < 0) {
      for (int m = 0; m < static_cast<int>(mol_.atom_count()); ++m) cands.push_back(m);
    } else {
      for (const auto& nb : mol_.neighbors(map_[parent_[depth]])) cands.push_back(nb.atom);
      std::sort(cands.begin(), cands.end());
    }
    for (int m : cands) {
      if (!feasible(p, m)) continue;
      map_[p] = m;
      if (extend(depth + 1)) return true;
      map_[p] = -1;
    }
    return false;
  }

  const chem::Molecule& mol_;
  const chem::Molecule& pat_;
  const std::vector<char>& taken_;
  std::vector<int> order_, parent_, map_;
};

}  // namespace

Decomposition decompose(const chem::Molecule& mol, const FragmentVocab& vocab) {
  if (mol.empty()) throw VocabError("decompose: empty molecule");
  const int n = static_cast<int>(mol.atom_count());
  std::vector<int> ranked;
  for (const auto& e : vocab.entries())
    if (e.pattern.atom_count() > 1 && e.pattern.atom_count() <= mol.atom_count()) ranked.push_back(e.id);
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    const auto &ea = vocab[a], &eb = vocab[b];
    if (ea.pattern.atom_count() != eb.pattern.atom_count())
      return ea.pattern.atom_count() > eb.pattern.atom_count();
    if (ea.frequency != eb.frequency) return ea.frequency > eb.frequency;
    return a < b;
  });

  std::vector<char> taken(n, 0);
  int free_atoms = n;
  Decomposition dec;
  for (int id : ranked) {
    const auto& pat = vocab[id].pattern;
    while (static_cast<int>(pat.atom_count()) <= free_atoms) {
      std::vector<int> hit;
      if (!Matcher(mol, pat, taken).find(hit)) break;
      for (int a : hit) taken[a] = 1;
      free_atoms -= static_cast<int>(hit.size());
      dec.fragments.push_back({id, std::move(hit)});
    }
  }
  for (int a = 0; a < n; ++a) {
    if (taken[a]) continue;
    const int id = vocab.single_atom(mol.atom(a));
    if (id < 0) {
      const auto& at = mol.atom(a);
      throw VocabError("no vocabulary entry for atom type " + std::string(chem::element_symbol(at.element)) +
                       (at.charge ? " charge " + std::to_string(at.charge) : std::string()));
    }
    dec.fragments.push_back({id, {a}});
  }
  std::sort(dec.fragments.begin(), dec.fragments.end(), [](const auto& x, const auto& y) {
    return *std::min_element(x.atoms.begin(), x.atoms.end()) <
           *std::min_element(y.atoms.begin(), y.atoms.end());
  });
  dec.fragment_of_atom.assign(n, -1);
  for (std::size_t f = 0; f < dec.fragments.size(); ++f)
    for (int a : dec.fragments[f].atoms) dec.fragment_of_atom[a] = static_cast<int>(f);
  for (const auto& b : mol.bonds())
    if (dec.fragment_of_atom[b.a] != dec.fragment_of_atom[b.b]) dec.inter_bonds.push_back(b);
  return dec;
}

chem::Molecule compose(const Decomposition& dec, const FragmentVocab& vocab, std::size_t atom_count) {
  std::vector<chem::Atom> atoms(atom_count);
  std::vector<char> placed(atom_count, 0);
  for (const auto& f : dec.fragments) {
    const auto& pat = vocab[f.vocab_id].pattern;
    if (f.atoms.size() != pat.atom_count()) throw VocabError("fragment size does not match its entry");
    for (std::size_t i = 0; i < f.atoms.size(); ++i) {
      const auto a = static_cast<std::size_t>(f.atoms[i]);
      if (a >= atom_count || placed[a]) throw VocabError("fragments do not partition the atoms");
      placed[a] = 1;
      atoms[a] = pat.atom(static_cast<int>(i));
    }
  }
  if (std::find(placed.begin(), placed.end(), 0) != placed.end())
    throw VocabError("fragments do not cover every atom");
  chem::Molecule mol;
  for (const auto& a : atoms) mol.add_atom(a);
  for (const auto& f : dec.fragments)
    for (const auto& b : vocab[f.vocab_id].pattern.bonds()) mol.add_bond(f.atoms[b.a], f.atoms[b.b], b.order);
  for (const auto& b : dec.inter_bonds) mol.add_bond(b.a, b.b, b.order);
  return mol;
}

}  // namespace cfx::fragvocab
