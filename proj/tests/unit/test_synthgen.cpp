// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "ctbg/error.hpp"
#include "ctbg/synthgen.hpp"
#include "doctest.h"

using namespace ctbg;

namespace {

// Reading-order guess from geometry alone: the nearest unit to the right on
// the same line, else the unit starting the next line of the same column.
std::vector<std::size_t> nearest_right_successors(const std::vector<UnitBox>& u) {
  const std::size_t n = u.size();
  auto same_line = [&](std::size_t a, std::size_t b) {
    return std::abs(u[a].cy() - u[b].cy()) < 0.5 * std::min(u[a].height(), u[b].height());
  };
  auto right_of = [&](std::size_t i) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !same_line(i, j) || u[j].x0 < u[i].x1 - 1e-9) continue;
      const double gap = u[j].x0 - u[i].x1;
      if (gap > u[i].height()) continue;
      if (!best || gap < u[*best].x0 - u[i].x1) best = j;
    }
    return best;
  };
  auto left_of = [&](std::size_t i) -> std::optional<std::size_t> {
    for (std::size_t j = 0; j < n; ++j)
      if (auto r = right_of(j); r && *r == i) return j;
    return std::nullopt;
  };

  std::vector<std::size_t> succ(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (auto r = right_of(i)) {
      succ[i] = *r;
      continue;
    }
    std::size_t start = i;
    for (auto l = left_of(start); l; l = left_of(start)) start = *l;
    const double h = u[i].height();
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < n; ++j) {
      const double dy = u[j].cy() - u[i].cy();
      if (dy < 0.5 * h || dy > 2.0 * h) continue;
      if (std::abs(u[j].x0 - u[start].x0) > 0.5 * h) continue;
      if (!best || dy < u[*best].cy() - u[i].cy()) best = j;
    }
    if (best) succ[i] = *best;
  }
  return succ;
}

std::vector<std::size_t> successors(const Scene& s) {
  std::vector<std::size_t> succ(s.units.size(), s.units.size());
  for (const auto& b : s.blocks)
    for (std::size_t i = 0; i + 1 < b.size(); ++i) succ[b[i]] = b[i + 1];
  return succ;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("generation is deterministic in the seed") {
  const auto cfg = easy_difficulty();
  CHECK(generate_scene(7, cfg) == generate_scene(7, cfg));
  CHECK_FALSE(generate_scene(7, cfg) == generate_scene(8, cfg));
  const auto hard = hard_difficulty();
  CHECK(generate_scene(7, hard) == generate_scene(7, hard));
}

TEST_CASE("one block of one unit") {
  auto cfg = easy_difficulty();
  cfg.min_blocks = cfg.max_blocks = 1;
  cfg.min_units = cfg.max_units = 1;
  const auto s = generate_scene(3, cfg);
  CHECK(s.units.size() == 1);
  CHECK(s.blocks == std::vector<Block>{{0}});
}

TEST_CASE("scenes are valid for both presets") {
  for (const auto& cfg : {easy_difficulty(), hard_difficulty()}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto s = generate_scene(seed, cfg);
      CHECK_NOTHROW(validate_scene(s));
      CHECK(s.blocks.size() >= cfg.min_blocks);
      CHECK(s.blocks.size() <= cfg.max_blocks);
      for (const auto& b : s.blocks) {
        CHECK(b.size() >= cfg.min_units);
        CHECK(b.size() <= cfg.max_units);
      }
    }
  }
}

TEST_CASE("easy blocks keep their margin") {
  const auto cfg = easy_difficulty();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(seed, cfg);
    std::vector<UnitBox> hulls;
    for (const auto& b : s.blocks) {
      UnitBox h = s.units[b[0]];
      for (auto i : b) h = union_box(h, s.units[i]);
      hulls.push_back(h);
    }
    for (std::size_t a = 0; a < hulls.size(); ++a) {
      for (std::size_t b = a + 1; b < hulls.size(); ++b) {
        const double gap_x = std::max(hulls[a].x0 - hulls[b].x1, hulls[b].x0 - hulls[a].x1);
        const double gap_y = std::max(hulls[a].y0 - hulls[b].y1, hulls[b].y0 - hulls[a].y1);
        CHECK(std::max(gap_x, gap_y) >= cfg.margin - 1e-12);
      }
    }
  }
}

TEST_CASE("reading order is row-major within each block") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(seed, easy_difficulty());
    for (const auto& b : s.blocks) {
      for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        const auto& a = s.units[b[i]];
        const auto& c = s.units[b[i + 1]];
        const bool same_row = std::abs(a.cy() - c.cy()) < 1e-9;
        if (same_row) {
          CHECK(c.x0 > a.x1);
        } else {
          CHECK(c.cy() > a.cy());
        }
      }
    }
  }
}

TEST_CASE("nearest-right-neighbour heuristic recovers easy reading order") {
  std::size_t hit = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(seed, easy_difficulty());
    const auto truth = successors(s);
    const auto guess = nearest_right_successors(s.units);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == s.units.size()) continue;
      ++total;
      hit += guess[i] == truth[i];
    }
  }
  CHECK(static_cast<double>(hit) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("configuration errors") {
  auto cfg = easy_difficulty();
  cfg.min_blocks = 5;
  cfg.max_blocks = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = easy_difficulty();
  cfg.jitter = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(difficulty_preset("medium"), ConfigError);

  cfg = easy_difficulty();
  cfg.min_blocks = cfg.max_blocks = 40;
  cfg.margin = 0.2;
  cfg.scene_retries = 3;
  cfg.placement_retries = 20;
  CHECK_THROWS_AS(generate_scene(1, cfg), InfeasibleError);
}

TEST_CASE("validate_scene rejects broken scenes") {
  Scene s{{{0.1, 0.1, 0.2, 0.2}, {0.3, 0.1, 0.4, 0.2}}, {{0, 1}}};
  CHECK_NOTHROW(validate_scene(s));
  s.blocks = {{0}};
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  s.blocks = {{0, 1}};
  s.units[1] = {0.3, 0.1, 0.3, 0.2};
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
  s.units[1] = {0.3, 0.1, 1.4, 0.2};
  CHECK_THROWS_AS(validate_scene(s), ConfigError);
}

TEST_CASE("rasterize") {
  const RasterConfig rc{8, 8, 2};
  SUBCASE("empty scene has zero occupancy") {
    const auto f = rasterize(Scene{}, rc);
    REQUIRE(f.size() == 2);
    CHECK(f[0].shape == Shape{kFeatureChannels, 8, 8});
    CHECK(f[1].shape == Shape{kFeatureChannels, 4, 4});
    for (std::size_t k = 0; k < 64; ++k) CHECK(f[0].data[k] == 0.0);
  }
  SUBCASE("one box covering one cell") {
    Scene s{{{2.0 / 8 + 0.01, 3.0 / 8 + 0.01, 3.0 / 8 - 0.01, 4.0 / 8 - 0.01}}, {{0}}};
    const auto f = rasterize(s, rc);
    double total = 0;
    for (std::size_t k = 0; k < 64; ++k) total += f[0].data[k];
    CHECK(total == 1.0);
    CHECK(f[0].data[3 * 8 + 2] == 1.0);
    CHECK(f[0].data[3 * 64 + 3 * 8 + 2] == doctest::Approx(s.units[0].height()));
  }
  SUBCASE("two overlapping boxes count twice") {
    Scene s{{{0.26, 0.26, 0.37, 0.37}, {0.27, 0.27, 0.36, 0.36}}, {{0}, {1}}};
    const auto f = rasterize(s, rc);
    CHECK(f[0].data[2 * 8 + 2] == 2.0);
  }
  SUBCASE("coordinate channels hold cell centres") {
    const auto f = rasterize(Scene{}, rc);
    CHECK(f[0].data[1 * 64 + 0 * 8 + 5] == doctest::Approx(5.5 / 8));
    CHECK(f[0].data[2 * 64 + 6 * 8 + 0] == doctest::Approx(6.5 / 8));
  }
  CHECK_THROWS_AS(rasterize(Scene{}, RasterConfig{8, 8, 1}), ConfigError);
}

TEST_CASE("corpus seeds are consecutive") {
  const auto corpus = generate_corpus(40, 3, easy_difficulty());
  REQUIRE(corpus.size() == 3);
  CHECK(corpus[2] == generate_scene(42, easy_difficulty()));
}

}  // TEST_SUITE
