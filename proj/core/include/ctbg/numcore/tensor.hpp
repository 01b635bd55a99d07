// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctbg {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major array. `data.size() == numel(shape)` always holds.
template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape, std::vector<U>(data.begin(), data.end()));
  }
};

/// A named learned tensor.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Owns every parameter of a model. Addresses stay valid for the store's
/// lifetime; iteration order is registration order.
template <class T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  /// Registers a zero-filled parameter. Names must be unique.
  Parameter<T>& add(std::string name, Shape shape);

  Parameter<T>* find(std::string_view name);
  const Parameter<T>* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t total_numel() const;

  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::vector<const Parameter<T>*> pointers() const;

 private:
  std::deque<Parameter<T>> params_;
};

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
template <class T>
void init_uniform_fan_in(Parameter<T>& p, std::size_t fan_in, std::mt19937_64& rng);

template <class T>
void init_uniform(Parameter<T>& p, double bound, std::mt19937_64& rng);

template <class T>
void init_constant(Parameter<T>& p, T value);

}  // namespace ctbg
