// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "ctbg/numcore/tape.hpp"

// Differentiable primitives. Matrices are rank-2 [rows, cols]; zero-row
// operands are allowed everywhere. Shape disagreements throw ShapeError.
namespace ctbg::ops {

template <class T>
Var<T> matmul(Var<T> a, Var<T> b);

/// a [n,k] times transpose(b) where b is [m,k].
template <class T>
Var<T> matmul_bt(Var<T> a, Var<T> b);

/// x [n,k] * w [k,m] + bias [m]
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);

template <class T>
Var<T> add(Var<T> a, Var<T> b);

template <class T>
Var<T> sub(Var<T> a, Var<T> b);

template <class T>
Var<T> mul(Var<T> a, Var<T> b);

template <class T>
Var<T> scale(Var<T> x, T factor);

template <class T>
Var<T> relu(Var<T> x);

/// Row-wise normalization with learned gain and bias, both [cols].
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));

/// Row-wise softmax. Entries equal to -inf get probability exactly 0; a row
/// with no finite entry is a NumericError.
template <class T>
Var<T> softmax_rows(Var<T> x);

template <class T>
Var<T> reshape(Var<T> x, Shape shape);

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts);

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts);

template <class T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> rows);

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count);

/// x + additive, where additive has x's shape and holds 0 or -inf.
template <class T>
Var<T> add_mask(Var<T> x, std::span<const T> additive);

template <class T>
Var<T> sum(Var<T> x);

template <class T>
Var<T> mean(Var<T> x);

/// Mean over rows of -log softmax(row)[label].
template <class T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::size_t> labels);

/// Mean binary cross-entropy of sigmoid(logit) against 0/1 labels; an empty
/// input yields a zero scalar.
template <class T>
Var<T> bce_with_logits(Var<T> logits, std::span<const T> labels);

}  // namespace ctbg::ops
