#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "kipkit/common.hpp"

namespace kipkit {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState(std::size_t n, double learning_rate)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {
    if (lr <= 0.0) throw InvalidParam("learning rate must be positive");
  }
};

inline std::vector<double> adam_update(AdamState& state, const std::vector<double>& params,
                                       const std::vector<double>& grad) {
  const std::size_t n = state.m.size();
  if (state.v.size() != n || params.size() != n || grad.size() != n)
    throw DimensionMismatch("adam_update vector lengths differ");
  for (double g : grad)
    if (!std::isfinite(g)) throw NonFiniteGradient("gradient has a non-finite entry");

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    out[i] = params[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return out;
}

}  // namespace kipkit
