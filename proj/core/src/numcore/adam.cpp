// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/adam.hpp"

#include <cmath>
#include <string>

#include "ctbg/error.hpp"

namespace ctbg {

template <class T>
AdamState<T> make_adam_state(const ParameterStore<T>& params, AdamConfig config) {
  AdamState<T> state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p.value.size(), T{0});
    state.v.emplace_back(p.value.size(), T{0});
  }
  return state;
}

template <class T>
void adam_step(AdamState<T>& state, ParameterStore<T>& params,
               const std::vector<std::vector<T>>& grads, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: expected " + std::to_string(params.size()) + " gradient tensors");
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].value.data;
    const auto& g = grads[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (g.size() != p.size() || m.size() != p.size()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params[k].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      const double updated = static_cast<double>(p[i]) * decay - lr * mhat / (std::sqrt(vhat) + c.eps);
      p[i] = static_cast<T>(updated);
    }
  }
}

template AdamState<float> make_adam_state<float>(const ParameterStore<float>&, AdamConfig);
template AdamState<double> make_adam_state<double>(const ParameterStore<double>&, AdamConfig);
template void adam_step<float>(AdamState<float>&, ParameterStore<float>&,
                               const std::vector<std::vector<float>>&, double);
template void adam_step<double>(AdamState<double>&, ParameterStore<double>&,
                                const std::vector<std::vector<double>>&, double);

}  // namespace ctbg
