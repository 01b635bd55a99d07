// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "ctbg/error.hpp"

namespace ctbg {

MatchResult match_units(std::span<const UnitBox> pred, std::span<const UnitBox> gt, double thr) {
  struct Pair {
    double iou;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double v = iou(pred[p], gt[g]);
      if (v >= thr && v > 0) pairs.push_back({v, p, g});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    return std::tie(a.p, a.g) < std::tie(b.p, b.g);
  });
  MatchResult m;
  m.pred_to_gt.assign(pred.size(), std::nullopt);
  m.iou.assign(pred.size(), 0.0);
  std::vector<char> gt_used(gt.size(), 0);
  for (const auto& pr : pairs) {
    if (m.pred_to_gt[pr.p] || gt_used[pr.g]) continue;
    m.pred_to_gt[pr.p] = pr.g;
    m.iou[pr.p] = pr.iou;
    gt_used[pr.g] = 1;
  }
  return m;
}

MatchResult identity_match(std::size_t n) {
  MatchResult m;
  m.iou.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) m.pred_to_gt.emplace_back(i);
  return m;
}

MetricCounts& MetricCounts::operator+=(const MetricCounts& o) {
  la_correct += o.la_correct;
  la_total += o.la_total;
  for (std::size_t k = 0; k < kMaxNgram; ++k) {
    ngram_clipped[k] += o.ngram_clipped[k];
    ngram_pred[k] += o.ngram_pred[k];
    ngram_gt[k] += o.ngram_gt[k];
  }
  ga_detected += o.ga_detected;
  ga_total += o.ga_total;
  return *this;
}

double MetricCounts::la() const {
  return la_total == 0 ? 1.0 : static_cast<double>(la_correct) / static_cast<double>(la_total);
}

double MetricCounts::lc() const {
  double log_sum = 0;
  std::size_t orders = 0;
  for (std::size_t k = 0; k < kMaxNgram; ++k) {
    if (ngram_pred[k] == 0 && ngram_gt[k] == 0) continue;
    if (ngram_clipped[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(ngram_clipped[k]) / static_cast<double>(ngram_pred[k]));
    ++orders;
  }
  return orders == 0 ? 1.0 : std::exp(log_sum / static_cast<double>(orders));
}

double MetricCounts::ga() const {
  return ga_total == 0 ? 1.0 : static_cast<double>(ga_detected) / static_cast<double>(ga_total);
}

MetricCounts count_metrics(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                           const MatchResult& match, std::size_t num_gt_units) {
  MetricCounts c;
  const std::size_t num_pred = match.pred_to_gt.size();

  // predicted blocks as token sequences; unmatched units get tokens past the GT range
  std::vector<std::vector<std::size_t>> seqs;
  for (const auto& b : pred_blocks) {
    std::vector<std::size_t> s;
    for (auto p : b) {
      if (p >= num_pred) throw ShapeError("predicted block references unknown unit");
      s.push_back(match.pred_to_gt[p] ? *match.pred_to_gt[p] : num_gt_units + p);
    }
    seqs.push_back(std::move(s));
  }

  // local accuracy: GT successor pairs reproduced as adjacent predicted tokens
  std::set<std::pair<std::size_t, std::size_t>> pred_adjacent;
  for (const auto& s : seqs)
    for (std::size_t i = 0; i + 1 < s.size(); ++i) pred_adjacent.emplace(s[i], s[i + 1]);
  for (const auto& b : gt_blocks) {
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
      ++c.la_total;
      if (pred_adjacent.count({b[i], b[i + 1]})) ++c.la_correct;
    }
  }

  // local continuity: clipped n-gram counts
  for (std::size_t n = 1; n <= kMaxNgram; ++n) {
    std::map<std::vector<std::size_t>, std::size_t> gt_grams, pred_grams;
    for (const auto& b : gt_blocks)
      for (std::size_t i = 0; i + n <= b.size(); ++i)
        ++gt_grams[std::vector<std::size_t>(b.begin() + static_cast<std::ptrdiff_t>(i),
                                            b.begin() + static_cast<std::ptrdiff_t>(i + n))];
    for (const auto& s : seqs)
      for (std::size_t i = 0; i + n <= s.size(); ++i)
        ++pred_grams[std::vector<std::size_t>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                              s.begin() + static_cast<std::ptrdiff_t>(i + n))];
    for (const auto& [g, cnt] : gt_grams) c.ngram_gt[n - 1] += cnt;
    for (const auto& [g, cnt] : pred_grams) {
      c.ngram_pred[n - 1] += cnt;
      const auto it = gt_grams.find(g);
      if (it != gt_grams.end()) c.ngram_clipped[n - 1] += std::min(cnt, it->second);
    }
  }

  // global accuracy: GT blocks reproduced exactly by some predicted block
  std::multiset<std::vector<std::size_t>> pred_seqs(seqs.begin(), seqs.end());
  for (const auto& b : gt_blocks) {
    ++c.ga_total;
    const auto it = pred_seqs.find(std::vector<std::size_t>(b.begin(), b.end()));
    if (it != pred_seqs.end()) {
      ++c.ga_detected;
      pred_seqs.erase(it);
    }
  }
  return c;
}

namespace {

std::size_t gt_unit_count(std::span<const Block> gt_blocks) {
  std::size_t n = 0;
  for (const auto& b : gt_blocks)
    for (auto u : b) n = std::max(n, u + 1);
  return n;
}

}  // namespace

double local_accuracy(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                      const MatchResult& match) {
  return count_metrics(pred_blocks, gt_blocks, match, gt_unit_count(gt_blocks)).la();
}

double local_continuity(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                        const MatchResult& match) {
  return count_metrics(pred_blocks, gt_blocks, match, gt_unit_count(gt_blocks)).lc();
}

double global_accuracy(std::span<const Block> pred_blocks, std::span<const Block> gt_blocks,
                       const MatchResult& match) {
  return count_metrics(pred_blocks, gt_blocks, match, gt_unit_count(gt_blocks)).ga();
}

double sweep_threshold(std::size_t k) { return static_cast<double>(50 + 5 * k) / 100.0; }

MetricTriple evaluate_at(std::span<const ScenePrediction> preds, std::span<const Scene> gts, double thr) {
  if (preds.size() != gts.size()) throw ShapeError("prediction and ground-truth corpora differ in length");
  MetricCounts total;
  for (std::size_t s = 0; s < gts.size(); ++s) {
    const auto match = match_units(preds[s].units, gts[s].units, thr);
    total += count_metrics(preds[s].blocks, gts[s].blocks, match, gts[s].units.size());
  }
  return {total.la(), total.lc(), total.ga()};
}

MetricReport evaluate(std::span<const ScenePrediction> preds, std::span<const Scene> gts) {
  MetricReport r;
  for (std::size_t k = 0; k < kIouSweep; ++k) {
    r.sweep[k] = evaluate_at(preds, gts, sweep_threshold(k));
    r.iou_avg.la += r.sweep[k].la / kIouSweep;
    r.iou_avg.lc += r.sweep[k].lc / kIouSweep;
    r.iou_avg.ga += r.sweep[k].ga / kIouSweep;
  }
  r.iou50 = r.sweep[0];
  r.iou75 = r.sweep[5];
  return r;
}

}  // namespace ctbg
