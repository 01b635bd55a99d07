// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ctbg/graph.hpp"
#include "ctbg/numcore/ops.hpp"
#include "ctbg/numcore/sampling.hpp"
#include "ctbg/numcore/tape.hpp"

namespace ctbg {

struct DeformAttnConfig {
  std::size_t heads = 4;
  std::size_t levels = 2;
  std::size_t points = 4;
  std::size_t dim = 32;
  std::size_t ffn_dim = 128;

  std::size_t head_dim() const { return dim / heads; }
  /// Throws ConfigError unless every size is positive and dim % heads == 0.
  void validate() const;
};

/// Additive self-attention mask: 0 where attention may flow, -inf where it
/// is blocked. Row-major n x n; the diagonal is always open.
struct AttnMask {
  std::size_t n = 0;
  std::vector<double> additive;

  bool open(std::size_t i, std::size_t j) const { return additive[i * n + j] == 0.0; }
  static AttnMask all_open(std::size_t n);
};

/// Opens (i, j) iff i and j share an undirected connected component of the
/// proposal graph.
AttnMask relation_aware_mask(std::size_t n, const EdgeSet& proposals);

template <class T>
struct Linear {
  const Parameter<T>* weight = nullptr;  // [in, out]
  const Parameter<T>* bias = nullptr;    // [out]

  /// Weights ~ uniform(+-1/sqrt(in)), bias zero.
  static Linear create(ParameterStore<T>& store, const std::string& name, std::size_t in,
                       std::size_t out, std::mt19937_64& rng);
  Var<T> operator()(Tape<T>& tape, Var<T> x) const;
};

template <class T>
struct LayerNorm {
  const Parameter<T>* gain = nullptr;
  const Parameter<T>* bias = nullptr;

  static LayerNorm create(ParameterStore<T>& store, const std::string& name, std::size_t dim);
  Var<T> operator()(Tape<T>& tape, Var<T> x) const;
};

/// Two-layer ReLU MLP.
template <class T>
struct FeedForward {
  Linear<T> up;
  Linear<T> down;

  static FeedForward create(ParameterStore<T>& store, const std::string& name, std::size_t dim,
                            std::size_t hidden, std::mt19937_64& rng);
  Var<T> operator()(Tape<T>& tape, Var<T> x) const;
};

/// Multi-head scaled dot-product self-attention with an optional additive mask.
template <class T>
class MultiHeadSelfAttention {
 public:
  static MultiHeadSelfAttention create(ParameterStore<T>& store, const std::string& name,
                                       const DeformAttnConfig& cfg, std::mt19937_64& rng);

  /// `head_weights`, when given, receives the post-softmax [n, n] weights per head.
  Var<T> forward(Tape<T>& tape, Var<T> x, const AttnMask* mask,
                 std::vector<Tensor<T>>* head_weights = nullptr) const;

  Linear<T> query, key, value, output;

 private:
  std::size_t heads_ = 1;
};

/// Simplified multi-scale deformable cross-attention. For each query, head,
/// level and point a linear offset (scaled by half the reference box size) is
/// added to the box centre; the samples are mixed with per-head softmax
/// weights over levels x points, value-projected, and output-projected.
template <class T>
class DeformableCrossAttention {
 public:
  static DeformableCrossAttention create(ParameterStore<T>& store, const std::string& name,
                                         const DeformAttnConfig& cfg, std::size_t channels,
                                         std::mt19937_64& rng);

  Var<T> forward(Tape<T>& tape, Var<T> queries, std::span<const UnitBox> refs,
                 const FeaturePyramid<T>& features) const;

  /// Normalized sampling locations [query][head][level][point] implied by
  /// `queries` (no tape involved).
  std::vector<std::vector<RasterPoint>> sampling_locations(const Tensor<T>& queries,
                                                           std::span<const UnitBox> refs) const;

  const DeformAttnConfig& config() const { return cfg_; }

  Linear<T> offsets;       // dim -> heads*levels*points*2, zero-initialized
  Linear<T> weights;       // dim -> heads*levels*points
  Linear<T> value;         // channels -> dim, applied to the sampled features
  Linear<T> output;        // dim -> dim

 private:
  DeformAttnConfig cfg_;
  std::size_t channels_ = 0;
};

/// Differentiable core of the deformable sampler. Given raw offsets
/// [n, H*L*P*2], normalized attention weights [n, H*L*P] and the augmented
/// value matrix [C+1, dim] (last row multiplies the in-bounds coverage, i.e.
/// acts as bias under zero padding), returns [n, dim].
template <class T>
Var<T> deformable_aggregate(Var<T> offsets, Var<T> attn, Var<T> value_aug,
                            std::span<const UnitBox> refs, const FeaturePyramid<T>& features,
                            const DeformAttnConfig& cfg);

}  // namespace ctbg
