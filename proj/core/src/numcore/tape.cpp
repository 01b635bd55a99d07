// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/tape.hpp"

#include <cmath>
#include <string>

#include "ctbg/error.hpp"

namespace ctbg {

template <class T>
const Shape& Var<T>::shape() const {
  return tape_->node(id_).shape;
}

template <class T>
std::span<const T> Var<T>::value() const {
  return tape_->node(id_).value;
}

template <class T>
std::size_t Var<T>::rows() const {
  const auto& s = shape();
  return s.empty() ? 1 : s[0];
}

template <class T>
std::size_t Var<T>::cols() const {
  const auto& s = shape();
  return s.size() < 2 ? 1 : s[1];
}

template <class T>
T Var<T>::item() const {
  const auto v = value();
  if (v.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return v[0];
}

template <class T>
Tensor<T> Var<T>::tensor() const {
  const auto v = value();
  return Tensor<T>(shape(), std::vector<T>(v.begin(), v.end()));
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> t) {
  return record("constant", std::move(t.shape), std::move(t.data), false, nullptr);
}

template <class T>
Var<T> Tape<T>::parameter(const Parameter<T>& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var<T>(this, it->second);
  auto v = record("parameter", p.value.shape, p.value.data, true, nullptr);
  nodes_[v.id()].source = &p;
  param_nodes_.emplace(&p, v.id());
  return v;
}

template <class T>
Var<T> Tape<T>::record(const char* op, Shape shape, std::vector<T> value, bool requires_grad,
                       BackwardFn backward, bool allow_neg_inf) {
  if (value.size() != numel(shape)) {
    throw ShapeError(std::string(op) + ": value length does not match shape " + to_string(shape));
  }
  for (const T x : value) {
    if (!std::isfinite(x) && !(allow_neg_inf && x < 0 && std::isinf(x))) {
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.allow_neg_inf = allow_neg_inf;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <class T>
std::span<T> Tape<T>::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad.assign(n.value.size(), T{0});
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.value().size() != 1 || !loss.shape().empty()) {
    throw ShapeError("backward requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (backward_done_) throw Error("backward already run on this tape");
  backward_done_ = true;
  grad(loss.id())[0] = T{1};
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    for (const T g : n.grad) {
      if (!std::isfinite(g)) {
        throw NumericError(std::string("non-finite gradient reached op '") + n.op + "'");
      }
    }
    if (n.backward) n.backward(*this, id);
  }
}

template <class T>
std::vector<std::vector<T>> Tape<T>::gradients(Var<T> loss,
                                               std::span<const Parameter<T>* const> params) {
  backward(loss);
  std::vector<std::vector<T>> out;
  out.reserve(params.size());
  for (const auto* p : params) {
    auto it = param_nodes_.find(p);
    if (it == param_nodes_.end() || nodes_[it->second].grad.empty()) {
      out.emplace_back(p->value.size(), T{0});
    } else {
      out.push_back(nodes_[it->second].grad);
    }
  }
  return out;
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace ctbg
