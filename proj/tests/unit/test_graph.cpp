// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "ctbg/error.hpp"
#include "ctbg/graph.hpp"
#include "doctest.h"

using namespace ctbg;

namespace {

UnitBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
  return {std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
}

// component label of every node via repeated BFS on the undirected graph
std::vector<std::vector<std::size_t>> reachability_components(std::size_t n, const EdgeSet& edges) {
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (const auto& e : edges) adj[e.src][e.dst] = adj[e.dst][e.src] = 1;
  std::vector<int> label(n, -1);
  std::vector<std::vector<std::size_t>> comps;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<std::size_t> stack{s}, comp;
    label[s] = static_cast<int>(comps.size());
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      comp.push_back(u);
      for (std::size_t v = 0; v < n; ++v) {
        if (adj[u][v] && label[v] < 0) {
          label[v] = label[s];
          stack.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(comp);
  }
  return comps;
}

EdgeSet random_edges(std::mt19937_64& rng, std::size_t n, double p) {
  EdgeSet edges;
  std::bernoulli_distribution keep(p);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && keep(rng)) edges.push_back({i, j, score(rng)});
  return edges;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("union_box") {
  const UnitBox b{0.1, 0.2, 0.3, 0.4};
  CHECK(union_box(b, b) == b);
  CHECK(union_box({0, 0, .2, .2}, {.3, .1, .5, .4}) == UnitBox{0, 0, .5, .4});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_box(rng), y = random_box(rng), z = random_box(rng);
    CHECK(union_box(x, y) == union_box(y, x));
    CHECK(union_box(union_box(x, y), z) == union_box(x, union_box(y, z)));
    CHECK(union_box(x, x) == x);
  }
}

TEST_CASE("iou") {
  const UnitBox b{0.1, 0.2, 0.3, 0.4};
  CHECK(iou(b, b) == doctest::Approx(1.0));
  CHECK(iou({0, 0, .1, .1}, {.5, .5, .6, .6}) == 0.0);
  CHECK(iou({0, 0, .2, .2}, {.1, 0, .3, .2}) == doctest::Approx(1.0 / 3.0));
  CHECK(iou({.1, .1, .1, .1}, {.1, .1, .1, .1}) == 0.0);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_box(rng), y = random_box(rng);
    const double v = iou(x, y);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(iou(y, x)));
  }
}

TEST_CASE("validate_edges") {
  CHECK_NOTHROW(validate_edges(3, {{0, 1, 1}, {1, 2, 1}}));
  CHECK_THROWS_AS(validate_edges(3, {{0, 3, 1}}), ConfigError);
  CHECK_THROWS_AS(validate_edges(3, {{1, 1, 1}}), ConfigError);
  CHECK_THROWS_AS(validate_edges(3, {{0, 1, 1}, {0, 1, 0.5}}), ConfigError);
}

TEST_CASE("connected_components") {
  using C = std::vector<std::vector<std::size_t>>;
  CHECK(connected_components(3, {}) == C{{0}, {1}, {2}});
  CHECK(connected_components(4, {{0, 1, 1}, {2, 3, 1}}) == C{{0, 1}, {2, 3}});
  CHECK(connected_components(4, {{3, 0, 1}}) == C{{0, 3}, {1}, {2}});
  CHECK_THROWS_AS(connected_components(2, {{0, 2, 1}}), ConfigError);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 8;
    const auto edges = random_edges(rng, n, 0.15);
    CHECK(connected_components(n, edges) == reachability_components(n, edges));
  }
}

TEST_CASE("assemble_blocks examples") {
  using B = std::vector<Block>;
  CHECK(assemble_blocks(3, {{0, 1, .9}, {1, 2, .8}}) == B{{0, 1, 2}});
  CHECK(assemble_blocks(3, {{0, 1, .9}, {2, 1, .8}}) == B{{0, 1}, {2}});
  CHECK(assemble_blocks(2, {{0, 1, .9}, {1, 0, .7}}) == B{{0, 1}});
  CHECK(assemble_blocks(3, {}) == B{{0}, {1}, {2}});
  // out-degree conflict: keep the higher score
  CHECK(assemble_blocks(3, {{0, 1, .4}, {0, 2, .6}}) == B{{0, 2}, {1}});
  // equal scores: the lower dst wins
  CHECK(assemble_blocks(3, {{0, 2, .5}, {0, 1, .5}}) == B{{0, 1}, {2}});
  // three-cycle loses its weakest edge
  CHECK(assemble_blocks(3, {{0, 1, .9}, {1, 2, .3}, {2, 0, .8}}) == B{{2, 0, 1}});
}

TEST_CASE("assemble_blocks always partitions without cycles") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng() % 9;
    const auto edges = random_edges(rng, n, 0.3);
    const auto blocks = assemble_blocks(n, edges);
    REQUIRE(is_partition(n, blocks));
    EdgeSet chain;
    for (const auto& b : blocks)
      for (std::size_t i = 0; i + 1 < b.size(); ++i) chain.push_back({b[i], b[i + 1], 1});
    CHECK_FALSE(has_cycle(n, chain));
    // every chain link is one of the input edges
    std::set<std::pair<std::size_t, std::size_t>> given;
    for (const auto& e : edges) given.emplace(e.src, e.dst);
    for (const auto& e : chain) CHECK(given.count({e.src, e.dst}) == 1);
  }
}

TEST_CASE("has_cycle") {
  CHECK(has_cycle(2, {{0, 1, 1}, {1, 0, 1}}));
  CHECK_FALSE(has_cycle(3, {{0, 1, 1}, {1, 2, 1}}));
  CHECK(has_cycle(4, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 1, 1}}));
}

TEST_CASE("is_partition and successors_from_blocks") {
  const std::vector<Block> blocks{{2, 0}, {1}, {3, 4}};
  CHECK(is_partition(5, blocks));
  CHECK_FALSE(is_partition(6, blocks));
  CHECK_FALSE(is_partition(5, std::vector<Block>{{0, 1}, {1, 2, 3, 4}}));
  CHECK_FALSE(is_partition(2, std::vector<Block>{{0, 1}, {}}));
  CHECK(successors_from_blocks(5, blocks) == std::vector<std::size_t>{5, 5, 0, 4, 5});
}

}  // TEST_SUITE
