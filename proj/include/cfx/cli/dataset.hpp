#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/chem/featurize.hpp"
#include "cfx/gnn/gnn.hpp"
#include "json.hpp"

namespace cfx::cli {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Row {
  std::string smiles;
  int label = 0;
};

// Rule label of the toy task: 1 when any N-O bond is present.
bool has_n_o_bond(const chem::Molecule& mol);

struct ToyOptions {
  std::size_t count = 500;
  int min_atoms = 4;
  int max_atoms = 10;
  std::uint64_t seed = 0;
};

// Random C/N/O molecules, unique by canonical key, half of them positive.
std::vector<Row> toy_dataset(const ToyOptions& options);

void write_csv(const std::filesystem::path& path, const std::vector<Row>& rows);
// Rows "smiles,label" with an optional header. Malformed lines are counted in
// `bad_lines` and skipped.
std::vector<Row> read_csv(const std::filesystem::path& path, std::size_t* bad_lines = nullptr);

struct PrepOptions {
  std::size_t min_element_count = 50;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double max_skip_rate = 0.1;
  std::uint64_t seed = 0;
};

struct DatasetBundle {
  std::vector<gnn::LabeledMolecule> train, valid, test;
  chem::ElementSet elements;
  nlohmann::json provenance = nlohmann::json::object();

  void save(const std::filesystem::path& dir) const;
  static DatasetBundle load(const std::filesystem::path& dir);
};

// Parse, drop rare elements, dedupe by canonical key (first kept), seeded
// shuffle and split. Unparseable rows are skipped; a skip rate above
// `max_skip_rate` is an error.
DatasetBundle prep(const std::vector<Row>& rows, const PrepOptions& options, const std::string& source = "");

}  // namespace cfx::cli
