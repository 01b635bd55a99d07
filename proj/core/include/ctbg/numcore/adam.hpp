// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "ctbg/numcore/tensor.hpp"

namespace ctbg {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;  // decoupled: p <- p * (1 - lr * wd)
};

/// First/second moments mirror the parameter store layout.
template <class T>
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

template <class T>
AdamState<T> make_adam_state(const ParameterStore<T>& params, AdamConfig config = {});

/// One bias-corrected Adam update with decoupled weight decay at learning
/// rate `lr`. `grads` is aligned with the store's registration order.
template <class T>
void adam_step(AdamState<T>& state, ParameterStore<T>& params,
               const std::vector<std::vector<T>>& grads, double lr);

}  // namespace ctbg
