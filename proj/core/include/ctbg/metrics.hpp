// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ctbg/graph.hpp"
#include "ctbg/synthgen.hpp"

namespace ctbg {

/// Partial one-to-one map from predicted units to ground-truth units.
struct MatchResult {
  std::vector<std::optional<std::size_t>> pred_to_gt;
  std::vector<double> iou;  // per predicted unit; 0 when unmatched
};

/// Greedy matching by descending IoU over pairs with IoU >= thr; ties by
/// (pred index, gt index).
MatchResult match_units(std::span<const UnitBox> pred, std::span<const UnitBox> gt, double thr);

/// Unit i matched to unit i with IoU 1.
MatchResult identity_match(std::size_t n);

inline constexpr std::size_t kMaxNgram = 4;

/// Poolable counts behind the three metrics.
struct MetricCounts {
  std::size_t la_correct = 0;
  std::size_t la_total = 0;  // ground-truth successor pairs
  std::array<std::size_t, kMaxNgram> ngram_clipped{};
  std::array<std::size_t, kMaxNgram> ngram_pred{};
  std::array<std::size_t, kMaxNgram> ngram_gt{};
  std::size_t ga_detected = 0;
  std::size_t ga_total = 0;  // ground-truth blocks

  MetricCounts& operator+=(const MetricCounts& other);

  /// 1 when there is nothing to count.
  double la() const;
  /// Geometric mean of clipped n-gram precisions for n = 1..4. An order with
  /// no n-grams on either side is skipped; an order with ground-truth
  /// n-grams but no predicted ones scores 0.
  double lc() const;
  double ga() const;
};

/// Counts for one scene. `pred_blocks` index predicted units, `gt_blocks`
/// index ground-truth units; `match` maps the former onto the latter.
MetricCounts count_metrics(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                           const MatchResult& match, std::size_t num_gt_units);

double local_accuracy(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                      const MatchResult& match);
double local_continuity(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                        const MatchResult& match);
double global_accuracy(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                       const MatchResult& match);

struct ScenePrediction {
  std::vector<UnitBox> units;
  EdgeSet edges;
  std::vector<Block> blocks;
};

struct MetricTriple {
  double la = 0;
  double lc = 0;
  double ga = 0;
};

inline constexpr std::size_t kIouSweep = 10;

/// Threshold k of the sweep: 0.50, 0.55, ..., 0.95.
double sweep_threshold(std::size_t k);

struct MetricReport {
  MetricTriple iou50;
  MetricTriple iou75;
  MetricTriple iou_avg;  // mean over the sweep
  std::array<MetricTriple, kIouSweep> sweep{};
};

/// Metrics at threshold `thr`, counts pooled over scenes.
MetricTriple evaluate_at(std::span<const ScenePrediction> preds, std::span<const Scene> gts, double thr);

/// Throws ShapeError when the corpora differ in length.
MetricReport evaluate(std::span<const ScenePrediction> preds, std::span<const Scene> gts);

}  // namespace ctbg
