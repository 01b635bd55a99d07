// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "ctbg/error.hpp"

namespace ctbg {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

}  // namespace

UnitBox union_box(const UnitBox& a, const UnitBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

double iou(const UnitBox& a, const UnitBox& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double inter = (iw > 0 && ih > 0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

void validate_edges(std::size_t n, const EdgeSet& edges) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) {
      throw ConfigError("edge endpoint out of range: " + std::to_string(e.src) + "->" +
                        std::to_string(e.dst) + " with n=" + std::to_string(n));
    }
    if (e.src == e.dst) throw ConfigError("self-loop on node " + std::to_string(e.src));
    if (!seen.emplace(e.src, e.dst).second) {
      throw ConfigError("duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst));
    }
  }
}

std::vector<std::vector<std::size_t>> connected_components(std::size_t n, const EdgeSet& edges) {
  DisjointSets sets(n);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw ConfigError("connected_components: index out of range");
    sets.unite(e.src, e.dst);
  }
  std::vector<std::size_t> slot(n, kNone);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = sets.find(i);
    if (slot[root] == kNone) {
      slot[root] = out.size();
      out.emplace_back();
    }
    out[slot[root]].push_back(i);
  }
  return out;
}

std::vector<Block> assemble_blocks(std::size_t n, const EdgeSet& edges) {
  std::vector<Edge> order;
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw ConfigError("assemble_blocks: index out of range");
    if (e.src != e.dst) order.push_back(e);
  }
  std::stable_sort(order.begin(), order.end(), [](const Edge& a, const Edge& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.dst != b.dst) return a.dst < b.dst;
    return a.src < b.src;
  });

  std::vector<std::size_t> next(n, kNone), prev(n, kNone);
  std::vector<double> next_score(n, 0.0);
  for (const auto& e : order) {
    if (next[e.src] != kNone || prev[e.dst] != kNone) continue;
    next[e.src] = e.dst;
    prev[e.dst] = e.src;
    next_score[e.src] = e.score;
  }

  // With in/out degree <= 1 every cycle is a closed ring; each node sits on
  // at most one, so a single sweep finds them all.
  std::vector<char> state(n, 0);  // 0 unvisited, 1 on current walk, 2 done
  for (std::size_t start = 0; start < n; ++start) {
    if (state[start]) continue;
    std::vector<std::size_t> walk;
    std::size_t cur = start;
    while (cur != kNone && state[cur] == 0) {
      state[cur] = 1;
      walk.push_back(cur);
      cur = next[cur];
    }
    if (cur != kNone && state[cur] == 1) {
      // ring from cur back to cur; drop its weakest link (ties: lower src)
      std::size_t weakest = cur;
      std::size_t node = next[cur];
      while (node != cur) {
        if (next_score[node] < next_score[weakest] ||
            (next_score[node] == next_score[weakest] && node < weakest)) {
          weakest = node;
        }
        node = next[node];
      }
      prev[next[weakest]] = kNone;
      next[weakest] = kNone;
    }
    for (auto v : walk) state[v] = 2;
  }

  std::vector<Block> blocks;
  for (std::size_t i = 0; i < n; ++i) {
    if (prev[i] != kNone) continue;
    Block b;
    for (std::size_t cur = i; cur != kNone; cur = next[cur]) b.push_back(cur);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

bool has_cycle(std::size_t n, const EdgeSet& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw ConfigError("has_cycle: index out of range");
    adj[e.src].push_back(e.dst);
  }
  std::vector<char> color(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root]) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < adj[node].size()) {
        const auto nb = adj[node][idx++];
        if (color[nb] == 1) return true;
        if (color[nb] == 0) {
          color[nb] = 1;
          stack.emplace_back(nb, 0);
        }
      } else {
        color[node] = 2;
        stack.pop_back();
      }
    }
  }
  return false;
}

bool is_partition(std::size_t n, std::span<const Block> blocks) {
  std::vector<char> seen(n, 0);
  std::size_t count = 0;
  for (const auto& b : blocks) {
    if (b.empty()) return false;
    for (auto u : b) {
      if (u >= n || seen[u]) return false;
      seen[u] = 1;
      ++count;
    }
  }
  return count == n;
}

std::vector<std::size_t> successors_from_blocks(std::size_t n, std::span<const Block> blocks) {
  std::vector<std::size_t> succ(n, n);
  for (const auto& b : blocks) {
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
      if (b[k] >= n || b[k + 1] >= n) throw ConfigError("block index out of range");
      succ[b[k]] = b[k + 1];
    }
  }
  return succ;
}

}  // namespace ctbg
