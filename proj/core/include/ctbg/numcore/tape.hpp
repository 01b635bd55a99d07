// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "ctbg/numcore/tensor.hpp"

namespace ctbg {

template <class T>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; only valid while
/// the owning tape is alive.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::span<const T> value() const;
  std::size_t rows() const;
  std::size_t cols() const;
  /// Value of a single-element tensor.
  T item() const;
  Tensor<T> tensor() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation record. Ops append nodes in execution order;
/// `backward` visits them once each, newest first. One writer per tape.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    const char* op = "";
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until a gradient reaches the node
    bool requires_grad = false;
    bool allow_neg_inf = false;
    BackwardFn backward;
    const Parameter<T>* source = nullptr;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> t);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var<T> parameter(const Parameter<T>& p);

  /// Appends an op result. Throws NumericError if the value holds NaN or
  /// +/-inf (-inf is tolerated when `allow_neg_inf`, for masked logits).
  Var<T> record(const char* op, Shape shape, std::vector<T> value, bool requires_grad,
                BackwardFn backward, bool allow_neg_inf = false);

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, zero-allocated on first access.
  std::span<T> grad(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var<T> loss);

  /// Gradients of a scalar loss, aligned with `params`. Parameters that the
  /// loss does not reach get zeros.
  std::vector<std::vector<T>> gradients(Var<T> loss, std::span<const Parameter<T>* const> params);

 private:
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

}  // namespace ctbg
