// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ctbg/attention.hpp"
#include "ctbg/graph.hpp"
#include "ctbg/numcore/sampling.hpp"
#include "ctbg/numcore/tape.hpp"

namespace ctbg {

/// Architecture and graph-refinement settings of the relation transformer.
struct ModelConfig {
  std::size_t dim = 32;
  std::size_t heads = 4;
  std::size_t levels = 2;
  std::size_t points = 4;
  std::size_t ffn_dim = 128;
  std::size_t layers = 3;   // node and edge decoders each
  std::size_t top_k = 3;    // proposals per node
  double prune_threshold = 0.5;
  double accept_threshold = 0.5;
  bool dgsr = true;  // dynamic graph structure refinement
  bool caf = true;   // cross-attention before self-attention
  bool rasa = true;  // relation-aware node self-attention
  std::size_t pos_freqs = 6;   // sinusoid octaves in the box encoding
  std::size_t raster_size = 64;

  void validate() const;
  DeformAttnConfig attention() const;
};

/// Candidate successor relation src -> dst carried through the decoder.
/// Its embedding is row `k` of DecoderState::edge_embeddings, where k is the
/// proposal's position in DecoderState::proposals.
struct EdgeProposal {
  std::size_t src = 0;
  std::size_t dst = 0;
  UnitBox ref_box;           // union of the two node boxes
  double class_score = 0.0;  // sigmoid of the latest edge-classification logit
  std::size_t born_layer = 0;
};

template <class T>
struct NodeState {
  Var<T> embeddings;  // [n, dim]
  std::vector<UnitBox> ref_boxes;
};

template <class T>
struct DecoderState {
  std::size_t layer = 0;
  NodeState<T> nodes;
  std::vector<EdgeProposal> proposals;
  Var<T> edge_embeddings;               // [proposals.size(), dim]
  std::vector<Var<T>> relation_scores;  // S^(0..layer), each [n, n+1], column n = EOB
  std::vector<Var<T>> edge_logits;      // layers 1..layer, each [m_l, 1]
  std::vector<std::vector<EdgeProposal>> classified;  // proposals scored at layers 1..layer
  std::vector<std::vector<EdgeProposal>> refined;     // proposal set after each refinement
};

template <class T>
struct ForwardResult {
  std::vector<Var<T>> relation_logits;  // l = 0..L
  std::vector<Var<T>> edge_logits;      // l = 1..L
  std::vector<std::vector<EdgeProposal>> classified;
  std::vector<std::vector<EdgeProposal>> refined;
  EdgeSet edges;
  std::vector<Block> blocks;
};

struct ForwardOptions {
  /// When set, graph decisions (top-K, pruning, finalization) read ideal
  /// scores derived from these successors (value n = end of block) instead of
  /// the heads. Loss-bearing logits are unaffected.
  const std::vector<std::size_t>* oracle_successors = nullptr;
};

// ---- graph decisions on plain scores -------------------------------------

/// Row-major relation logits [n, n+1] as doubles.
struct RelationScores {
  std::size_t n = 0;
  std::vector<double> logits;

  double at(std::size_t i, std::size_t j) const { return logits[i * (n + 1) + j]; }
};

/// The k best non-EOB successor candidates of node i (j != i), best first;
/// ties go to the lower index.
std::vector<std::size_t> top_successors(const RelationScores& scores, std::size_t i, std::size_t k);

/// (src, dst) pairs of the initial proposals: top-k candidates per node,
/// nodes in index order.
std::vector<std::pair<std::size_t, std::size_t>> initial_proposal_pairs(const RelationScores& scores,
                                                                        std::size_t k);

struct RefinePlan {
  std::vector<std::size_t> kept;                            // indices into the old proposal list
  std::vector<std::pair<std::size_t, std::size_t>> added;   // fresh (src, dst) pairs
};

/// Drops proposals scoring below `threshold`; every node left without an
/// outgoing proposal receives its top-k candidates, skipping pairs that
/// survived.
RefinePlan plan_refinement(std::size_t n, std::span<const EdgeProposal> proposals,
                           const RelationScores& scores, std::size_t k, double threshold);

/// Per node, the single best proposal with class score >= threshold (ties:
/// higher relation logit, then lower dst). Edge scores are class scores.
EdgeSet select_final_edges(std::size_t n, std::span<const EdgeProposal> proposals,
                           const RelationScores& scores, double threshold);

/// Ideal relation logits for a successor map: 0 at the successor (or EOB),
/// -30 elsewhere, -inf on the diagonal.
RelationScores oracle_relation_scores(const std::vector<std::size_t>& successors);

// ---- model -----------------------------------------------------------------

template <class T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  /// Box-geometry MLP plus a linear map of the multi-scale samples at each
  /// box centre. Throws ConfigError on an empty unit list.
  NodeState<T> encode_nodes(Tape<T>& tape, std::span<const UnitBox> units,
                            const FeaturePyramid<T>& features) const;

  /// Biaffine successor logits of stage `stage` (0 = query initialization).
  Var<T> relation_scores(Tape<T>& tape, std::size_t stage, Var<T> nodes) const;

  /// Edge-classification logits [m, 1] of decoder layer `layer` (1-based).
  Var<T> edge_logits(Tape<T>& tape, std::size_t layer, Var<T> edges) const;

  /// Seeds the decoder state with top-k proposals read from `s0`.
  DecoderState<T> init_edge_queries(Tape<T>& tape, NodeState<T> nodes, Var<T> s0,
                                    const RelationScores& selection) const;

  /// One node-decoder and one edge-decoder layer; increments state.layer.
  DecoderState<T> decoder_layer(Tape<T>& tape, DecoderState<T> state,
                                const FeaturePyramid<T>& features) const;

  /// Prune-and-repropose step; identity when DGSR is off. Proposal class
  /// scores must already hold the current layer's classification.
  DecoderState<T> refine_edges(Tape<T>& tape, DecoderState<T> state,
                               const RelationScores& selection) const;

  EdgeSet finalize_edges(const DecoderState<T>& state, const RelationScores& selection) const;

  ForwardResult<T> forward(Tape<T>& tape, std::span<const UnitBox> units,
                           const FeaturePyramid<T>& features, const ForwardOptions& options = {}) const;

 private:
  struct RelationHead {
    Linear<T> src;
    Linear<T> dst;
    const Parameter<T>* bilinear = nullptr;  // [dim, dim]
    const Parameter<T>* eob = nullptr;       // [dim, 1]
  };

  struct DecoderBlock {
    DeformableCrossAttention<T> cross;
    MultiHeadSelfAttention<T> self;
    FeedForward<T> ffn;
    LayerNorm<T> norm_cross;
    LayerNorm<T> norm_self;
    LayerNorm<T> norm_ffn;

    Var<T> forward(Tape<T>& tape, Var<T> x, std::span<const UnitBox> boxes,
                   const FeaturePyramid<T>& features, const AttnMask* mask, bool cross_first) const;
  };

  Var<T> merge_pairs(Tape<T>& tape, std::size_t stage, Var<T> nodes,
                     std::span<const std::pair<std::size_t, std::size_t>> pairs) const;

  ModelConfig config_;
  ParameterStore<T> params_;
  Linear<T> geometry_in_;
  Linear<T> geometry_out_;
  Linear<T> feature_proj_;
  std::vector<RelationHead> relation_heads_;  // stages 0..L
  std::vector<FeedForward<T>> edge_heads_;    // layers 1..L at index l-1
  std::vector<Linear<T>> merges_;             // FC_init per stage 0..L-1
  std::vector<DecoderBlock> node_layers_;
  std::vector<DecoderBlock> edge_layers_;
};

/// Box geometry encoding fed to the node MLP: x0, y0, x1, y1, w, h followed
/// by sin/cos of each at `freqs` octaves of pi.
std::vector<double> encode_box_geometry(const UnitBox& box, std::size_t freqs);

template <class T>
RelationScores to_relation_scores(Var<T> logits);

}  // namespace ctbg
