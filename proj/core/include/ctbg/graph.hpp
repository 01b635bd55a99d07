// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ctbg {

/// Axis-aligned box in normalized image coordinates, x0 <= x1 and y0 <= y1.
struct UnitBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  bool valid() const { return x0 <= x1 && y0 <= y1; }

  friend bool operator==(const UnitBox&, const UnitBox&) = default;
};

/// Directed successor relation src -> dst.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double score = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// No self-loops and no repeated (src, dst) pair; see validate_edges.
using EdgeSet = std::vector<Edge>;

/// Unit indices in reading order.
using Block = std::vector<std::size_t>;

UnitBox union_box(const UnitBox& a, const UnitBox& b);

/// Intersection over union; 0 when the union has zero area.
double iou(const UnitBox& a, const UnitBox& b);

/// Throws ConfigError on an out-of-range endpoint, a self-loop, or a duplicate pair.
void validate_edges(std::size_t n, const EdgeSet& edges);

/// Components of the undirected graph, each sorted ascending, ordered by
/// smallest member. Isolated nodes come back as singletons.
std::vector<std::vector<std::size_t>> connected_components(std::size_t n, const EdgeSet& edges);

/// Turns scored successor edges into reading-order blocks. Conflicts on
/// in/out degree keep the higher score (ties: lower dst, then lower src);
/// each remaining cycle loses its lowest-scoring edge. Chains and isolated
/// nodes become blocks, ordered by first unit index; every unit appears once.
std::vector<Block> assemble_blocks(std::size_t n, const EdgeSet& edges);

/// True when following successor links from some node returns to it.
bool has_cycle(std::size_t n, const EdgeSet& edges);

/// True when `blocks` covers 0..n-1 exactly once with non-empty blocks.
bool is_partition(std::size_t n, std::span<const Block> blocks);

/// Successor of each unit implied by `blocks`; n marks end of block.
std::vector<std::size_t> successors_from_blocks(std::size_t n, std::span<const Block> blocks);

}  // namespace ctbg
