// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ctbg/error.hpp"

namespace ctbg {
namespace {

struct Rect {
  double x0, y0, x1, y1;
};

bool overlaps(const Rect& a, const Rect& b, double clearance) {
  return a.x0 < b.x1 + clearance && b.x0 < a.x1 + clearance && a.y0 < b.y1 + clearance &&
         b.y0 < a.y1 + clearance;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_count(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Units of one block laid out relative to the block's top-left corner.
struct BlockLayout {
  std::vector<Rect> units;
  double width = 0;
  double height = 0;
};

std::vector<std::size_t> split_rows(std::size_t units, std::size_t rows) {
  std::vector<std::size_t> counts(rows, units / rows);
  for (std::size_t r = 0; r < units % rows; ++r) ++counts[r];
  return counts;
}

BlockLayout layout_block(std::mt19937_64& rng, const DifficultyConfig& cfg) {
  const std::size_t count = uniform_count(rng, cfg.min_units, cfg.max_units);
  const double h = uniform(rng, cfg.min_height, cfg.max_height);
  std::vector<double> widths(count), heights(count);
  for (std::size_t k = 0; k < count; ++k) {
    heights[k] = h * (1.0 + uniform(rng, -cfg.height_variation, cfg.height_variation));
    widths[k] = h * uniform(rng, cfg.min_aspect, cfg.max_aspect);
  }
  const double gap = 0.3 * h;
  const double pitch = 1.5 * h;

  std::size_t rows = 1;
  if (count >= 2 && std::bernoulli_distribution(cfg.wrap_prob)(rng)) {
    rows = uniform_count(rng, 2, std::min(count, std::max<std::size_t>(cfg.max_rows, 2)));
  }
  for (;; ++rows) {
    const auto counts = split_rows(count, rows);
    BlockLayout out;
    std::size_t k = 0;
    bool fits = true;
    for (std::size_t r = 0; r < rows; ++r) {
      double x = 0;
      for (std::size_t c = 0; c < counts[r]; ++c, ++k) {
        const double top = static_cast<double>(r) * pitch + 0.5 * (h - heights[k]);
        out.units.push_back({x, top, x + widths[k], top + heights[k]});
        x += widths[k] + gap;
      }
      const double row_width = x - gap;
      out.width = std::max(out.width, row_width);
      fits = fits && row_width <= cfg.max_row_width;
    }
    for (const auto& u : out.units) out.height = std::max(out.height, u.y1);
    if (fits || rows >= count) return out;
  }
}

}  // namespace

void DifficultyConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("difficulty: " + what); };
  if (min_blocks < 1 || min_blocks > max_blocks) fail("block count range is empty");
  if (min_units < 1 || min_units > max_units) fail("units-per-block range is empty");
  if (!(wrap_prob >= 0 && wrap_prob <= 1)) fail("wrap_prob must lie in [0,1]");
  if (!(overlap_prob >= 0 && overlap_prob <= 1)) fail("overlap_prob must lie in [0,1]");
  if (!(jitter >= 0)) fail("jitter must be >= 0");
  if (!(margin >= 0)) fail("margin must be >= 0");
  if (!(min_height > 0 && min_height <= max_height && max_height < 0.5)) fail("bad height range");
  if (!(min_aspect > 0 && min_aspect <= max_aspect)) fail("bad aspect range");
  if (!(height_variation >= 0 && height_variation < 1)) fail("height_variation must lie in [0,1)");
  if (!(max_row_width > 0 && max_row_width <= 0.98)) fail("max_row_width must lie in (0,0.98]");
  if (max_rows < 1) fail("max_rows must be >= 1");
  if (placement_retries < 1 || scene_retries < 1) fail("retry budgets must be >= 1");
}

DifficultyConfig easy_difficulty() { return DifficultyConfig{}; }

DifficultyConfig hard_difficulty() {
  DifficultyConfig cfg;
  cfg.min_blocks = 2;
  cfg.max_blocks = 5;
  cfg.min_units = 1;
  cfg.max_units = 7;
  cfg.wrap_prob = 0.5;
  cfg.jitter = 0.003;
  cfg.margin = 0.015;
  cfg.overlap_prob = 0.3;
  cfg.min_height = 0.02;
  cfg.max_height = 0.06;
  cfg.min_aspect = 1.0;
  cfg.max_aspect = 4.0;
  cfg.height_variation = 0.2;
  return cfg;
}

DifficultyConfig difficulty_preset(std::string_view name) {
  if (name == "easy") return easy_difficulty();
  if (name == "hard") return hard_difficulty();
  throw ConfigError("unknown difficulty preset '" + std::string(name) + "'");
}

Scene generate_scene(std::uint64_t seed, const DifficultyConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  constexpr double kBorder = 0.01;

  for (std::size_t attempt = 0; attempt < cfg.scene_retries; ++attempt) {
    const std::size_t block_count = uniform_count(rng, cfg.min_blocks, cfg.max_blocks);
    std::vector<Rect> block_rects;
    std::vector<Rect> unit_rects;
    std::vector<Block> blocks;
    bool placed_all = true;

    for (std::size_t b = 0; b < block_count && placed_all; ++b) {
      const auto layout = layout_block(rng, cfg);
      const bool interleave = std::bernoulli_distribution(cfg.overlap_prob)(rng);
      bool placed = false;
      const bool too_large =
          layout.width > 1.0 - 2 * kBorder || layout.height > 1.0 - 2 * kBorder;
      for (std::size_t t = 0; t < cfg.placement_retries && !placed && !too_large; ++t) {
        const double bx = uniform(rng, kBorder, 1.0 - kBorder - layout.width);
        const double by = uniform(rng, kBorder, 1.0 - kBorder - layout.height);
        const Rect rect{bx, by, bx + layout.width, by + layout.height};
        std::vector<Rect> shifted;
        for (const auto& u : layout.units) {
          shifted.push_back({u.x0 + bx, u.y0 + by, u.x1 + bx, u.y1 + by});
        }
        bool ok = true;
        if (interleave) {
          for (const auto& s : shifted)
            for (const auto& u : unit_rects) ok = ok && !overlaps(s, u, 0.25 * cfg.min_height);
        } else {
          for (const auto& r : block_rects) ok = ok && !overlaps(rect, r, cfg.margin);
        }
        if (!ok) continue;
        Block block;
        for (const auto& s : shifted) {
          block.push_back(unit_rects.size());
          unit_rects.push_back(s);
        }
        blocks.push_back(std::move(block));
        block_rects.push_back(rect);
        placed = true;
      }
      placed_all = placed;
    }
    if (!placed_all) continue;

    Scene scene;
    std::normal_distribution<double> noise(0.0, cfg.jitter);
    for (const auto& r : unit_rects) {
      double dx = 0, dy = 0;
      if (cfg.jitter > 0) {
        dx = noise(rng);
        dy = noise(rng);
      }
      UnitBox box{r.x0 + dx, r.y0 + dy, r.x1 + dx, r.y1 + dy};
      const double sx = std::clamp(box.x0, 0.0, 1.0 - box.width()) - box.x0;
      const double sy = std::clamp(box.y0, 0.0, 1.0 - box.height()) - box.y0;
      scene.units.push_back({box.x0 + sx, box.y0 + sy, box.x1 + sx, box.y1 + sy});
    }

    // present units in a scrambled order so indices carry no reading-order hint
    std::vector<std::size_t> perm(scene.units.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<UnitBox> shuffled(scene.units.size());
    std::vector<std::size_t> new_index(scene.units.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      shuffled[k] = scene.units[perm[k]];
      new_index[perm[k]] = k;
    }
    scene.units = std::move(shuffled);
    for (auto& block : blocks)
      for (auto& u : block) u = new_index[u];
    scene.blocks = std::move(blocks);
    return scene;
  }
  throw InfeasibleError("could not place the requested blocks after " +
                        std::to_string(cfg.scene_retries) + " attempts");
}

std::vector<Scene> generate_corpus(std::uint64_t first_seed, std::size_t count,
                                   const DifficultyConfig& cfg) {
  std::vector<Scene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene(first_seed + i, cfg));
  return out;
}

void validate_scene(const Scene& scene) {
  for (const auto& u : scene.units) {
    if (!(u.x0 >= 0 && u.y0 >= 0 && u.x1 <= 1 && u.y1 <= 1 && u.x0 < u.x1 && u.y0 < u.y1)) {
      throw ConfigError("scene box outside [0,1]^2 or degenerate");
    }
  }
  if (!is_partition(scene.units.size(), scene.blocks)) {
    throw ConfigError("scene blocks do not partition the units");
  }
}

FeaturePyramid<double> rasterize(const Scene& scene, const RasterConfig& cfg) {
  if (cfg.levels < 2) throw ConfigError("rasterize: at least two levels are required");
  if ((cfg.height >> (cfg.levels - 1)) == 0 || (cfg.width >> (cfg.levels - 1)) == 0) {
    throw ConfigError("rasterize: too many levels for the raster size");
  }
  FeaturePyramid<double> pyramid;
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    const std::size_t H = cfg.height >> l, W = cfg.width >> l;
    Tensor<double> map(Shape{kFeatureChannels, H, W});
    const std::size_t plane = H * W;
    std::vector<double> height_sum(plane, 0.0);
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        map.data[1 * plane + r * W + c] = (static_cast<double>(c) + 0.5) / static_cast<double>(W);
        map.data[2 * plane + r * W + c] = (static_cast<double>(r) + 0.5) / static_cast<double>(H);
      }
    }
    for (const auto& u : scene.units) {
      const double gx0 = u.x0 * W, gx1 = u.x1 * W, gy0 = u.y0 * H, gy1 = u.y1 * H;
      const auto c_lo = static_cast<long>(std::max(0.0, std::floor(gx0)));
      const auto c_hi = static_cast<long>(std::min<double>(W, std::ceil(gx1)));
      const auto r_lo = static_cast<long>(std::max(0.0, std::floor(gy0)));
      const auto r_hi = static_cast<long>(std::min<double>(H, std::ceil(gy1)));
      for (long r = r_lo; r < r_hi; ++r) {
        if (!(gy0 < r + 1 && gy1 > r)) continue;
        for (long c = c_lo; c < c_hi; ++c) {
          if (!(gx0 < c + 1 && gx1 > c)) continue;
          const std::size_t cell = static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c);
          map.data[cell] += 1.0;
          height_sum[cell] += u.height();
        }
      }
    }
    for (std::size_t cell = 0; cell < plane; ++cell) {
      if (map.data[cell] > 0) map.data[3 * plane + cell] = height_sum[cell] / map.data[cell];
    }
    pyramid.push_back(std::move(map));
  }
  return pyramid;
}

}  // namespace ctbg
