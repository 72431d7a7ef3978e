#pragma once

#include <map>
#include <string>
#include <vector>

#include "cfx/numkit/rng.hpp"
#include "cfx/numkit/tensor.hpp"

namespace cfx::nk {

// Rounds every value onto the float32 grid.
void round_to_float(Tensor& t);

struct Parameter {
  Tensor value;
  Tensor grad;
};

// Named parameter bundle. Iteration order is the lexical name order, which
// fixes the checkpoint layout and optimizer traversal.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Glorot-uniform matrix on the float32 grid.
  Parameter& add_glorot(const std::string& name, std::size_t rows,
                        std::size_t cols, Rng& rng, double gain = 1.0);
  Parameter& add_zeros(const std::string& name, std::size_t rows,
                       std::size_t cols);

  std::vector<std::pair<std::string, Tensor>> export_tensors() const;
  // Replaces values by name. Every stored parameter must be present with a
  // matching shape.
  void import_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors,
                      const std::string& prefix = "");

 private:
  std::map<std::string, Parameter> params_;
};

}  // namespace cfx::nk
