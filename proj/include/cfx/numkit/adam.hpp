#pragma once

#include <map>
#include <string>

#include "cfx/numkit/params.hpp"

namespace cfx::nk {

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter " + param), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

// Adam with bias-corrected moments. Parameters are rounded back onto the
// float32 grid after each update.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update from the accumulated grads and clears them. All grads
  // are validated before any parameter is touched.
  void step(ParamStore& params);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long steps() const { return t_; }
  const AdamMoments& moments(const std::string& name) const { return state_.at(name); }
  AdamMoments& moments(const std::string& name) { return state_.at(name); }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, AdamMoments> state_;
};

// Global L2 norm clipping of accumulated gradients; returns the pre-clip norm.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace cfx::nk
