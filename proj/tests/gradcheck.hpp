#pragma once

// Central finite-difference oracle for tape gradients. Test-only: it drives
// the forward pass through the caller's closure and never touches backward().

#include <algorithm>
#include <cmath>
#include <string>

#include "cfx/numkit/params.hpp"
#include "cfx/numkit/tape.hpp"

namespace cfx::testing {

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;
};

// `build(tape)` returns the scalar loss. Relative error is measured per
// parameter tensor as ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
template <class Build>
GradCheck gradcheck(nk::ParamStore& params, Build build, double h = 1e-3,
                    double floor = 1e-6) {
  params.zero_grad();
  {
    nk::Tape tape;
    nk::Var loss = build(tape);
    tape.backward(loss);
  }
  GradCheck out;
  for (auto& [name, p] : params) {
    const nk::Tensor analytic = p.grad;
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + h;
      double up, down;
      {
        nk::Tape tape(false);
        up = build(tape).item();
      }
      p.value[i] = saved - h;
      {
        nk::Tape tape(false);
        down = build(tape).item();
      }
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff += (analytic[i] - numeric) * (analytic[i] - numeric);
      na += analytic[i] * analytic[i];
      nn += numeric * numeric;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
    if (rel > out.max_rel_err) {
      out.max_rel_err = rel;
      out.worst = name;
    }
  }
  params.zero_grad();
  return out;
}

}  // namespace cfx::testing
