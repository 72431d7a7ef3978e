#include "cfx/numkit/adam.hpp"

#include <cmath>

namespace cfx::nk {

void Adam::step(ParamStore& params) {
  for (auto& [name, p] : params) {
    if (!p.grad.all_finite()) throw NonFiniteGradient(name);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    auto it = state_.find(name);
    if (it == state_.end()) {
      it = state_.emplace(name, AdamMoments{Tensor(p.value.shape(), 0.0),
                                            Tensor(p.value.shape(), 0.0)}).first;
    }
    Tensor& m = it->second.m;
    Tensor& v = it->second.v;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    round_to_float(p.value);
    p.grad.fill(0.0);
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (auto& [_, p] : params)
    for (double g : p.grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [_, p] : params)
      for (double& g : p.grad.vec()) g *= s;
  }
  return norm;
}

}  // namespace cfx::nk
