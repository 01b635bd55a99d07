// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/dreamer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "ctbg/error.hpp"
#include "ctbg/numcore/ops.hpp"
#include "ctbg/synthgen.hpp"

namespace ctbg {

void ModelConfig::validate() const {
  attention().validate();
  if (layers < 1) throw ConfigError("model needs at least one decoder layer");
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(prune_threshold > 0 && prune_threshold < 1)) throw ConfigError("prune_threshold must lie in (0,1)");
  if (!(accept_threshold > 0 && accept_threshold < 1)) throw ConfigError("accept_threshold must lie in (0,1)");
  if (levels < 1) throw ConfigError("levels must be >= 1");
  if ((raster_size >> (levels - 1)) == 0) throw ConfigError("raster_size too small for the level count");
}

DeformAttnConfig ModelConfig::attention() const {
  return DeformAttnConfig{heads, levels, points, dim, ffn_dim};
}

// ---- graph decisions --------------------------------------------------------

std::vector<std::size_t> top_successors(const RelationScores& scores, std::size_t i, std::size_t k) {
  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < scores.n; ++j)
    if (j != i) cand.push_back(j);
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = scores.at(i, a), sb = scores.at(i, b);
                      if (sa != sb) return sa > sb;
                      return a < b;
                    });
  cand.resize(take);
  return cand;
}

std::vector<std::pair<std::size_t, std::size_t>> initial_proposal_pairs(const RelationScores& scores,
                                                                        std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < scores.n; ++i)
    for (auto j : top_successors(scores, i, k)) pairs.emplace_back(i, j);
  return pairs;
}

RefinePlan plan_refinement(std::size_t n, std::span<const EdgeProposal> proposals,
                           const RelationScores& scores, std::size_t k, double threshold) {
  RefinePlan plan;
  std::vector<char> has_out(n, 0);
  std::set<std::pair<std::size_t, std::size_t>> live;
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    if (proposals[p].class_score < threshold) continue;
    plan.kept.push_back(p);
    has_out[proposals[p].src] = 1;
    live.emplace(proposals[p].src, proposals[p].dst);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (has_out[i]) continue;
    for (auto j : top_successors(scores, i, k)) {
      if (live.emplace(i, j).second) plan.added.emplace_back(i, j);
    }
  }
  return plan;
}

EdgeSet select_final_edges(std::size_t n, std::span<const EdgeProposal> proposals,
                           const RelationScores& scores, double threshold) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> best(n, kNone);
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    const auto& e = proposals[p];
    if (e.class_score < threshold) continue;
    const auto cur = best[e.src];
    if (cur == kNone) {
      best[e.src] = p;
      continue;
    }
    const auto& b = proposals[cur];
    const double rs_e = scores.at(e.src, e.dst), rs_b = scores.at(b.src, b.dst);
    const bool better = e.class_score != b.class_score ? e.class_score > b.class_score
                        : rs_e != rs_b                 ? rs_e > rs_b
                                                       : e.dst < b.dst;
    if (better) best[e.src] = p;
  }
  EdgeSet out;
  for (std::size_t i = 0; i < n; ++i) {
    if (best[i] == kNone) continue;
    const auto& e = proposals[best[i]];
    out.push_back({e.src, e.dst, e.class_score});
  }
  return out;
}

RelationScores oracle_relation_scores(const std::vector<std::size_t>& successors) {
  const std::size_t n = successors.size();
  RelationScores s{n, std::vector<double>(n * (n + 1), -30.0)};
  for (std::size_t i = 0; i < n; ++i) {
    s.logits[i * (n + 1) + i] = -std::numeric_limits<double>::infinity();
    s.logits[i * (n + 1) + std::min(successors[i], n)] = 0.0;
  }
  return s;
}

template <class T>
RelationScores to_relation_scores(Var<T> logits) {
  const std::size_t n = logits.rows();
  if (logits.cols() != n + 1) throw ShapeError("relation logits must be [n, n+1]");
  const auto v = logits.value();
  return RelationScores{n, std::vector<double>(v.begin(), v.end())};
}

std::vector<double> encode_box_geometry(const UnitBox& box, std::size_t freqs) {
  const double raw[6] = {box.x0, box.y0, box.x1, box.y1, box.width(), box.height()};
  std::vector<double> out(raw, raw + 6);
  for (double v : raw) {
    double w = std::numbers::pi;
    for (std::size_t f = 0; f < freqs; ++f, w *= 2) {
      out.push_back(std::sin(w * v));
      out.push_back(std::cos(w * v));
    }
  }
  return out;
}

// ---- model ------------------------------------------------------------------

template <class T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto att = config_.attention();
  const std::size_t d = config_.dim;
  const std::size_t geo_dim = 6 * (1 + 2 * config_.pos_freqs);

  geometry_in_ = Linear<T>::create(params_, "encoder.geometry_in", geo_dim, d, rng);
  geometry_out_ = Linear<T>::create(params_, "encoder.geometry_out", d, d, rng);
  feature_proj_ =
      Linear<T>::create(params_, "encoder.features", config_.levels * kFeatureChannels, d, rng);

  for (std::size_t s = 0; s <= config_.layers; ++s) {
    const std::string name = "relation." + std::to_string(s);
    RelationHead head;
    head.src = Linear<T>::create(params_, name + ".src", d, d, rng);
    head.dst = Linear<T>::create(params_, name + ".dst", d, d, rng);
    auto& w = params_.add(name + ".bilinear", {d, d});
    init_uniform_fan_in(w, d, rng);
    auto& eob = params_.add(name + ".eob", {d, 1});
    init_uniform_fan_in(eob, d, rng);
    head.bilinear = &w;
    head.eob = &eob;
    relation_heads_.push_back(head);
  }
  for (std::size_t s = 0; s < config_.layers; ++s) {
    merges_.push_back(Linear<T>::create(params_, "merge." + std::to_string(s), 2 * d, d, rng));
  }
  auto make_block = [&](const std::string& name) {
    DecoderBlock b;
    b.cross = DeformableCrossAttention<T>::create(params_, name + ".cross", att, kFeatureChannels, rng);
    b.self = MultiHeadSelfAttention<T>::create(params_, name + ".self", att, rng);
    b.ffn = FeedForward<T>::create(params_, name + ".ffn", d, config_.ffn_dim, rng);
    b.norm_cross = LayerNorm<T>::create(params_, name + ".norm_cross", d);
    b.norm_self = LayerNorm<T>::create(params_, name + ".norm_self", d);
    b.norm_ffn = LayerNorm<T>::create(params_, name + ".norm_ffn", d);
    return b;
  };
  for (std::size_t l = 0; l < config_.layers; ++l) {
    node_layers_.push_back(make_block("node_decoder." + std::to_string(l)));
    edge_layers_.push_back(make_block("edge_decoder." + std::to_string(l)));
  }
  for (std::size_t l = 1; l <= config_.layers; ++l) {
    const std::string name = "edge_head." + std::to_string(l);
    FeedForward<T> head;
    head.up = Linear<T>::create(params_, name + ".up", d, d, rng);
    head.down = Linear<T>::create(params_, name + ".down", d, 1, rng);
    edge_heads_.push_back(head);
  }
}

template <class T>
NodeState<T> Model<T>::encode_nodes(Tape<T>& tape, std::span<const UnitBox> units,
                                    const FeaturePyramid<T>& features) const {
  const std::size_t n = units.size();
  if (n == 0) throw ConfigError("encode_nodes: scene has no units");
  if (features.size() < config_.levels) throw ShapeError("encode_nodes: too few feature levels");
  const std::size_t geo_dim = 6 * (1 + 2 * config_.pos_freqs);
  const std::size_t sample_dim = config_.levels * kFeatureChannels;

  Tensor<T> geo(Shape{n, geo_dim});
  Tensor<T> samples(Shape{n, sample_dim});
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = encode_box_geometry(units[i], config_.pos_freqs);
    std::copy(g.begin(), g.end(), geo.data.begin() + static_cast<std::ptrdiff_t>(i * geo_dim));
    for (std::size_t l = 0; l < config_.levels; ++l) {
      const auto& map = features[l];
      if (map.shape.at(0) != kFeatureChannels) throw ShapeError("encode_nodes: unexpected channel count");
      const RasterPoint centre{to_raster(units[i].cx(), map.shape[2]),
                               to_raster(units[i].cy(), map.shape[1])};
      const auto s = bilinear_sample(map, centre);
      std::copy(s.data.begin(), s.data.end(),
                samples.data.begin() + static_cast<std::ptrdiff_t>(i * sample_dim + l * kFeatureChannels));
    }
  }
  auto geometry = geometry_out_(tape, ops::relu(geometry_in_(tape, tape.constant(std::move(geo)))));
  auto sampled = feature_proj_(tape, tape.constant(std::move(samples)));
  return NodeState<T>{ops::add(geometry, sampled), std::vector<UnitBox>(units.begin(), units.end())};
}

template <class T>
Var<T> Model<T>::relation_scores(Tape<T>& tape, std::size_t stage, Var<T> nodes) const {
  if (stage >= relation_heads_.size()) throw ConfigError("relation head stage out of range");
  const auto& head = relation_heads_[stage];
  const std::size_t n = nodes.rows();
  auto a = head.src(tape, nodes);
  auto b = head.dst(tape, nodes);
  auto pair = ops::matmul_bt(ops::matmul(a, tape.parameter(*head.bilinear)), b);
  auto eob = ops::matmul(a, tape.parameter(*head.eob));
  const std::vector<Var<T>> parts{pair, eob};
  std::vector<T> diag(n * (n + 1), T{0});
  for (std::size_t i = 0; i < n; ++i) diag[i * (n + 1) + i] = -std::numeric_limits<T>::infinity();
  return ops::add_mask<T>(ops::concat_cols<T>(parts), diag);
}

template <class T>
Var<T> Model<T>::edge_logits(Tape<T>& tape, std::size_t layer, Var<T> edges) const {
  if (layer < 1 || layer > edge_heads_.size()) throw ConfigError("edge head layer out of range");
  return edge_heads_[layer - 1](tape, edges);
}

template <class T>
Var<T> Model<T>::merge_pairs(Tape<T>& tape, std::size_t stage, Var<T> nodes,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs) const {
  if (stage >= merges_.size()) throw ConfigError("no edge-query merge layer for this stage");
  std::vector<std::size_t> src, dst;
  for (const auto& [s, d] : pairs) {
    src.push_back(s);
    dst.push_back(d);
  }
  const std::vector<Var<T>> parts{ops::gather_rows<T>(nodes, src), ops::gather_rows<T>(nodes, dst)};
  return merges_[stage](tape, ops::concat_cols<T>(parts));
}

template <class T>
DecoderState<T> Model<T>::init_edge_queries(Tape<T>& tape, NodeState<T> nodes, Var<T> s0,
                                            const RelationScores& selection) const {
  const std::size_t n = nodes.ref_boxes.size();
  if (selection.n != n) throw ShapeError("init_edge_queries: score matrix does not match nodes");
  DecoderState<T> state;
  const auto pairs = initial_proposal_pairs(selection, config_.top_k);
  for (const auto& [s, d] : pairs) {
    state.proposals.push_back({s, d, union_box(nodes.ref_boxes[s], nodes.ref_boxes[d]), 0.0, 0});
  }
  state.edge_embeddings = pairs.empty() ? tape.constant(Tensor<T>(Shape{0, config_.dim}))
                                        : merge_pairs(tape, 0, nodes.embeddings, pairs);
  state.nodes = std::move(nodes);
  state.relation_scores.push_back(s0);
  return state;
}

template <class T>
Var<T> Model<T>::DecoderBlock::forward(Tape<T>& tape, Var<T> x, std::span<const UnitBox> boxes,
                                       const FeaturePyramid<T>& features, const AttnMask* mask,
                                       bool cross_first) const {
  auto cross_step = [&](Var<T> h) { return norm_cross(tape, ops::add(h, cross.forward(tape, h, boxes, features))); };
  auto self_step = [&](Var<T> h) { return norm_self(tape, ops::add(h, self.forward(tape, h, mask))); };
  x = cross_first ? self_step(cross_step(x)) : cross_step(self_step(x));
  return norm_ffn(tape, ops::add(x, ffn(tape, x)));
}

template <class T>
DecoderState<T> Model<T>::decoder_layer(Tape<T>& tape, DecoderState<T> state,
                                        const FeaturePyramid<T>& features) const {
  if (state.layer >= config_.layers) throw ConfigError("decoder_layer: terminal layer already reached");
  const std::size_t n = state.nodes.ref_boxes.size();
  if (n == 0) throw ConfigError("decoder_layer: no nodes");
  const auto& node_block = node_layers_[state.layer];
  const auto& edge_block = edge_layers_[state.layer];

  AttnMask mask;
  if (config_.rasa) {
    EdgeSet live;
    for (const auto& p : state.proposals) live.push_back({p.src, p.dst, p.class_score});
    mask = relation_aware_mask(n, live);
  }
  state.nodes.embeddings = node_block.forward(tape, state.nodes.embeddings, state.nodes.ref_boxes,
                                              features, config_.rasa ? &mask : nullptr, config_.caf);
  if (!state.proposals.empty()) {
    std::vector<UnitBox> boxes;
    boxes.reserve(state.proposals.size());
    for (const auto& p : state.proposals) boxes.push_back(p.ref_box);
    state.edge_embeddings =
        edge_block.forward(tape, state.edge_embeddings, boxes, features, nullptr, config_.caf);
  }
  state.layer += 1;
  return state;
}

template <class T>
DecoderState<T> Model<T>::refine_edges(Tape<T>& tape, DecoderState<T> state,
                                       const RelationScores& selection) const {
  if (!config_.dgsr) {
    state.refined.push_back(state.proposals);
    return state;
  }
  if (state.layer < 1 || state.layer >= merges_.size()) {
    throw ConfigError("refine_edges is only defined between decoder layers");
  }
  const std::size_t n = state.nodes.ref_boxes.size();
  const auto plan = plan_refinement(n, state.proposals, selection, config_.top_k, config_.prune_threshold);

  std::vector<EdgeProposal> next;
  next.reserve(plan.kept.size() + plan.added.size());
  for (auto k : plan.kept) next.push_back(state.proposals[k]);
  for (const auto& [s, d] : plan.added) {
    next.push_back({s, d, union_box(state.nodes.ref_boxes[s], state.nodes.ref_boxes[d]), 0.0, state.layer});
  }

  std::vector<Var<T>> parts;
  if (!plan.kept.empty()) parts.push_back(ops::gather_rows<T>(state.edge_embeddings, plan.kept));
  if (!plan.added.empty()) parts.push_back(merge_pairs(tape, state.layer, state.nodes.embeddings, plan.added));
  if (parts.empty()) {
    state.edge_embeddings = tape.constant(Tensor<T>(Shape{0, config_.dim}));
  } else if (parts.size() == 1) {
    state.edge_embeddings = parts[0];
  } else {
    state.edge_embeddings = ops::concat_rows<T>(parts);
  }
  state.proposals = std::move(next);
  state.refined.push_back(state.proposals);
  return state;
}

template <class T>
EdgeSet Model<T>::finalize_edges(const DecoderState<T>& state, const RelationScores& selection) const {
  return select_final_edges(state.nodes.ref_boxes.size(), state.proposals, selection,
                            config_.accept_threshold);
}

template <class T>
ForwardResult<T> Model<T>::forward(Tape<T>& tape, std::span<const UnitBox> units,
                                   const FeaturePyramid<T>& features,
                                   const ForwardOptions& options) const {
  const std::size_t n = units.size();
  const auto* oracle = options.oracle_successors;
  if (oracle != nullptr && oracle->size() != n) throw ShapeError("oracle successor count mismatch");
  auto select = [&](Var<T> logits) {
    return oracle != nullptr ? oracle_relation_scores(*oracle) : to_relation_scores(logits);
  };

  auto nodes = encode_nodes(tape, units, features);
  auto s0 = relation_scores(tape, 0, nodes.embeddings);
  auto state = init_edge_queries(tape, std::move(nodes), s0, select(s0));

  RelationScores selection;
  for (std::size_t l = 1; l <= config_.layers; ++l) {
    state = decoder_layer(tape, std::move(state), features);
    auto s = relation_scores(tape, l, state.nodes.embeddings);
    auto c = edge_logits(tape, l, state.edge_embeddings);
    state.relation_scores.push_back(s);
    state.edge_logits.push_back(c);
    const auto cv = c.value();
    for (std::size_t k = 0; k < state.proposals.size(); ++k) {
      auto& p = state.proposals[k];
      p.class_score = oracle != nullptr ? ((*oracle)[p.src] == p.dst ? 1.0 : 0.0)
                                        : 1.0 / (1.0 + std::exp(-static_cast<double>(cv[k])));
    }
    state.classified.push_back(state.proposals);
    selection = select(s);
    if (l < config_.layers) state = refine_edges(tape, std::move(state), selection);
  }

  ForwardResult<T> out;
  out.edges = finalize_edges(state, selection);
  out.blocks = assemble_blocks(n, out.edges);
  out.relation_logits = std::move(state.relation_scores);
  out.edge_logits = std::move(state.edge_logits);
  out.classified = std::move(state.classified);
  out.refined = std::move(state.refined);
  return out;
}

template class Model<float>;
template class Model<double>;
template RelationScores to_relation_scores<float>(Var<float>);
template RelationScores to_relation_scores<double>(Var<double>);

}  // namespace ctbg
