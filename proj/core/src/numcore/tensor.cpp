// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "ctbg/error.hpp"

namespace ctbg {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <class T>
Tensor<T>::Tensor(Shape s) : shape(std::move(s)), data(numel(shape), T{0}) {}

template <class T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + to_string(shape));
  }
}

template <class T>
Parameter<T>& ParameterStore<T>::add(std::string name, Shape shape) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(Parameter<T>{std::move(name), Tensor<T>(std::move(shape))});
  return params_.back();
}

template <class T>
Parameter<T>* ParameterStore<T>::find(std::string_view name) {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter<T>& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

template <class T>
const Parameter<T>* ParameterStore<T>::find(std::string_view name) const {
  auto it = std::find_if(params_.begin(), params_.end(),
                         [&](const Parameter<T>& p) { return p.name == name; });
  return it == params_.end() ? nullptr : &*it;
}

template <class T>
std::size_t ParameterStore<T>::total_numel() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

template <class T>
std::vector<const Parameter<T>*> ParameterStore<T>::pointers() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <class T>
void init_uniform_fan_in(Parameter<T>& p, std::size_t fan_in, std::mt19937_64& rng) {
  init_uniform(p, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1))), rng);
}

template <class T>
void init_uniform(Parameter<T>& p, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value.data) v = static_cast<T>(dist(rng));
}

template <class T>
void init_constant(Parameter<T>& p, T value) {
  std::fill(p.value.data.begin(), p.value.data.end(), value);
}

#define CTBG_INSTANTIATE(T)                                                       \
  template struct Tensor<T>;                                                      \
  template class ParameterStore<T>;                                               \
  template void init_uniform_fan_in<T>(Parameter<T>&, std::size_t, std::mt19937_64&); \
  template void init_uniform<T>(Parameter<T>&, double, std::mt19937_64&);         \
  template void init_constant<T>(Parameter<T>&, T);

CTBG_INSTANTIATE(float)
CTBG_INSTANTIATE(double)
#undef CTBG_INSTANTIATE

}  // namespace ctbg
