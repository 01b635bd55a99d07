// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ctbg/dreamer.hpp"
#include "ctbg/numcore/adam.hpp"
#include "ctbg/synthgen.hpp"

namespace ctbg {

struct TrainConfig {
  AdamConfig adam;
  std::size_t warmup_iters = 200;
  std::size_t total_iters = 5000;
  std::size_t batch_size = 8;
  std::size_t checkpoint_every = 1000;
  std::size_t workers = 1;  // threads for per-scene forward/backward

  void validate() const;
};

/// Learning rate at 1-based iteration `iter`: linear warmup, then constant.
double learning_rate(std::size_t iter, const TrainConfig& cfg);

/// Successor of every unit (n = end of block).
std::vector<std::size_t> successor_labels(const Scene& scene);

/// 1 where the proposal's dst is the ground-truth successor of its src.
template <class T>
std::vector<T> edge_labels(std::span<const EdgeProposal> proposals,
                           std::span<const std::size_t> successors);

/// Mean softmax cross-entropy of the [n, n+1] relation logits.
template <class T>
Var<T> loss_relation(Var<T> logits, std::span<const std::size_t> successors);

/// Mean binary cross-entropy of [m, 1] (or [m]) edge logits; 0 when m = 0.
template <class T>
Var<T> loss_edge(Var<T> logits, std::span<const T> labels);

template <class T>
struct LossBreakdown {
  Var<T> total;
  std::vector<Var<T>> relation;  // l = 0..L
  std::vector<Var<T>> edge;      // l = 1..L
};

/// Sum of every relation and edge loss of a forward pass. Throws ConfigError
/// when the result does not carry `layers` decoder layers of caches.
template <class T>
LossBreakdown<T> loss_overall(const ForwardResult<T>& result, std::span<const std::size_t> successors,
                              std::size_t layers);

struct LossLogRow {
  std::size_t iter = 0;
  double lr = 0;
  double loss_total = 0;
  double loss_rel_final = 0;
  double loss_edge_final = 0;
};

struct TrainOutputs {
  std::filesystem::path dir;  // empty: keep everything in memory
  std::function<void(const LossLogRow&)> on_iteration;
  std::size_t stop_after = 0;  // nonzero: end early, schedule unchanged
};

/// Runs cfg.total_iters Adam steps on batches drawn by per-epoch shuffles of
/// `corpus` seeded by `seed`. With an output directory, writes loss_log.csv,
/// checkpoint_<iter>.json every cfg.checkpoint_every iterations and
/// checkpoint.json at the end. Throws NumericError on a non-finite loss.
std::vector<LossLogRow> train(Model<float>& model, std::span<const Scene> corpus, const TrainConfig& cfg,
                              std::uint64_t seed, const TrainOutputs& outputs = {});

/// Forward pass on one scene with its rasterized features.
template <class T>
ForwardResult<T> run_scene(const Model<T>& model, Tape<T>& tape, const Scene& scene,
                           const ForwardOptions& options = {});

}  // namespace ctbg
