#include "cfx/numkit/params.hpp"

#include <cmath>
#include <stdexcept>

namespace cfx::nk {

void round_to_float(Tensor& t) {
  for (double& v : t.vec()) v = static_cast<double>(static_cast<float>(v));
}

Parameter& ParamStore::add(const std::string& name, Tensor value) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  round_to_float(value);
  Tensor grad(value.shape(), 0.0);
  auto [it, _] = params_.emplace(name, Parameter{std::move(value), std::move(grad)});
  return it->second;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

bool ParamStore::contains(const std::string& name) const { return params_.count(name) > 0; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

Parameter& ParamStore::add_glorot(const std::string& name, std::size_t rows,
                                  std::size_t cols, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.vec()) v = rng.uniform(-limit, limit);
  return add(name, std::move(t));
}

Parameter& ParamStore::add_zeros(const std::string& name, std::size_t rows,
                                 std::size_t cols) {
  return add(name, Tensor::matrix(rows, cols));
}

std::vector<std::pair<std::string, Tensor>> ParamStore::export_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, p] : params_) out.emplace_back(name, p.value);
  return out;
}

void ParamStore::import_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors,
                                const std::string& prefix) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  for (auto& [name, p] : params_) {
    auto it = by_name.find(prefix + name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint is missing tensor " + prefix + name);
    }
    if (it->second->shape() != p.value.shape()) {
      throw ShapeError("checkpoint tensor " + prefix + name + " has shape " +
                       it->second->shape_str() + ", expected " + p.value.shape_str());
    }
    p.value = *it->second;
    round_to_float(p.value);
    p.grad = Tensor(p.value.shape(), 0.0);
  }
}

}  // namespace cfx::nk
