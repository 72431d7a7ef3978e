#include "cfx/cli/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cfx/chem/canonical.hpp"
#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/chem/validity.hpp"

namespace cfx::cli {

bool has_n_o_bond(const chem::Molecule& mol) {
  for (const auto& b : mol.bonds()) {
    const int x = mol.atom(b.a).element, y = mol.atom(b.b).element;
    if ((x == 7 && y == 8) || (x == 8 && y == 7)) return true;
  }
  return false;
}

std::vector<Row> toy_dataset(const ToyOptions& options) {
  if (options.count < 2) throw DatasetError("toy dataset needs at least two molecules");
  nk::Rng rng = nk::Rng::stream(options.seed, "toy");
  chem::RandomMoleculeOptions ro;
  ro.min_atoms = options.min_atoms;
  ro.max_atoms = options.max_atoms;
  ro.element_weights = {{6, 10.0}, {7, 2.5}, {8, 2.5}};
  const std::size_t want_pos = options.count / 2, want_neg = options.count - want_pos;
  std::size_t pos = 0, neg = 0;
  std::set<std::string> seen;
  std::vector<Row> rows;
  for (std::size_t tries = 0; pos + neg < options.count; ++tries) {
    if (tries > 200 * options.count) throw DatasetError("toy generator could not reach the requested size");
    auto m = chem::random_molecule(rng, ro);
    const int label = has_n_o_bond(m) ? 1 : 0;
    if (label ? pos >= want_pos : neg >= want_neg) continue;
    if (!seen.insert(chem::canonical_key(m)).second) continue;
    (label ? pos : neg) += 1;
    rows.push_back({chem::write_smiles(m), label});
  }
  return rows;
}

void write_csv(const std::filesystem::path& path, const std::vector<Row>& rows) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "smiles,label\n";
  for (const auto& r : rows) out << r.smiles << ',' << r.label << '\n';
}

std::vector<Row> read_csv(const std::filesystem::path& path, std::size_t* bad_lines) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::vector<Row> rows;
  std::size_t bad = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (first && line.rfind("smiles", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    if (comma == std::string::npos) {
      ++bad;
      continue;
    }
    const std::string lab = line.substr(comma + 1);
    if (lab != "0" && lab != "1") {
      ++bad;
      continue;
    }
    rows.push_back({line.substr(0, comma), lab == "1" ? 1 : 0});
  }
  if (bad_lines) *bad_lines = bad;
  return rows;
}

namespace {

void write_split(const std::filesystem::path& path, const std::vector<gnn::LabeledMolecule>& split) {
  std::vector<Row> rows;
  for (const auto& m : split) rows.push_back({chem::write_smiles(m.mol), m.label});
  write_csv(path, rows);
}

std::vector<gnn::LabeledMolecule> read_split(const std::filesystem::path& path) {
  std::size_t bad = 0;
  auto rows = read_csv(path, &bad);
  if (bad) throw DatasetError(path.string() + " has malformed rows");
  std::vector<gnn::LabeledMolecule> out;
  for (const auto& r : rows) out.push_back({chem::parse_smiles(r.smiles), r.label});
  return out;
}

}  // namespace

void DatasetBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_split(dir / "train.csv", train);
  write_split(dir / "valid.csv", valid);
  write_split(dir / "test.csv", test);
  nlohmann::json j = provenance;
  j["elements"] = elements.symbols();
  j["sizes"] = {{"train", train.size()}, {"valid", valid.size()}, {"test", test.size()}};
  std::ofstream(dir / "bundle.json") << j.dump(2) << '\n';
}

DatasetBundle DatasetBundle::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bundle.json");
  if (!in) throw DatasetError("missing " + (dir / "bundle.json").string());
  DatasetBundle b;
  b.provenance = nlohmann::json::parse(in);
  b.elements = chem::ElementSet::from_symbols(b.provenance.at("elements").get<std::vector<std::string>>());
  b.train = read_split(dir / "train.csv");
  b.valid = read_split(dir / "valid.csv");
  b.test = read_split(dir / "test.csv");
  return b;
}

DatasetBundle prep(const std::vector<Row>& rows, const PrepOptions& options, const std::string& source) {
  if (rows.empty()) throw DatasetError("no rows to prepare");
  std::vector<gnn::LabeledMolecule> parsed;
  std::size_t skipped = 0;
  for (const auto& r : rows) {
    try {
      auto m = chem::parse_smiles(r.smiles);
      if (m.empty() || !chem::is_valid(m)) {
        ++skipped;
        continue;
      }
      parsed.push_back({std::move(m), r.label});
    } catch (const std::exception&) {
      ++skipped;
    }
  }
  const double rate = static_cast<double>(skipped) / static_cast<double>(rows.size());
  if (rate > options.max_skip_rate)
    throw DatasetError("skipped " + std::to_string(skipped) + " of " + std::to_string(rows.size()) +
                       " rows, above the allowed rate");

  std::map<int, std::size_t> freq;
  for (const auto& m : parsed)
    for (const auto& a : m.mol.atoms()) ++freq[a.element];
  std::set<int> rare;
  std::vector<int> kept_elements;
  for (const auto& [e, n] : freq) {
    if (n < options.min_element_count)
      rare.insert(e);
    else
      kept_elements.push_back(e);
  }

  std::vector<gnn::LabeledMolecule> clean;
  std::set<std::string> keys;
  std::size_t dropped_rare = 0, duplicates = 0;
  for (auto& m : parsed) {
    const auto& atoms = m.mol.atoms();
    if (std::any_of(atoms.begin(), atoms.end(), [&](const chem::Atom& a) { return rare.count(a.element) > 0; })) {
      ++dropped_rare;
      continue;
    }
    if (!keys.insert(chem::canonical_key(m.mol)).second) {
      ++duplicates;
      continue;
    }
    clean.push_back(std::move(m));
  }
  if (clean.size() < 3) throw DatasetError("fewer than three molecules survive preparation");

  nk::Rng rng = nk::Rng::stream(options.seed, "prep.split");
  for (std::size_t i = clean.size() - 1; i > 0; --i) std::swap(clean[i], clean[rng.below(i + 1)]);
  const std::size_t n = clean.size();
  const auto n_train = static_cast<std::size_t>(std::lround(options.train_fraction * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::lround(options.valid_fraction * static_cast<double>(n)));
  if (n_train + n_valid > n) throw DatasetError("split fractions exceed the dataset");

  DatasetBundle b;
  b.train.assign(clean.begin(), clean.begin() + static_cast<long>(n_train));
  b.valid.assign(clean.begin() + static_cast<long>(n_train), clean.begin() + static_cast<long>(n_train + n_valid));
  b.test.assign(clean.begin() + static_cast<long>(n_train + n_valid), clean.end());
  b.elements = chem::ElementSet(kept_elements);
  std::vector<std::string> rare_syms;
  for (int e : rare) rare_syms.emplace_back(chem::element_symbol(e));
  b.provenance = {{"source", source},
                  {"rows", rows.size()},
                  {"skipped_unparseable", skipped},
                  {"dropped_rare_element", dropped_rare},
                  {"rare_elements", rare_syms},
                  {"duplicates", duplicates},
                  {"min_element_count", options.min_element_count},
                  {"split_seed", options.seed}};
  return b;
}

}  // namespace cfx::cli
