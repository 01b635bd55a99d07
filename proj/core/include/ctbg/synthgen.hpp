// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ctbg/graph.hpp"
#include "ctbg/numcore/sampling.hpp"

namespace ctbg {

/// Layout knobs for synthetic scenes. Lengths are in normalized image units.
struct DifficultyConfig {
  std::size_t min_blocks = 2;
  std::size_t max_blocks = 4;
  std::size_t min_units = 2;  // per block
  std::size_t max_units = 5;
  double wrap_prob = 0.3;     // chance that a block spans several rows
  std::size_t max_rows = 3;
  double jitter = 0.0;        // std-dev of per-unit positional noise
  double margin = 0.05;       // clearance between block rectangles
  double overlap_prob = 0.0;  // chance a block ignores the margin and interleaves
  double min_height = 0.03;
  double max_height = 0.05;
  double min_aspect = 1.5;    // unit width / height
  double max_aspect = 3.0;
  double height_variation = 0.0;  // relative per-unit height spread within a block
  double max_row_width = 0.7;
  std::size_t placement_retries = 200;
  std::size_t scene_retries = 50;

  /// Throws ConfigError when a range is empty or a value is out of domain.
  void validate() const;
};

/// Wide margins, no jitter, no interleaving.
DifficultyConfig easy_difficulty();
/// Jitter, interleaved blocks, variable unit sizes.
DifficultyConfig hard_difficulty();
/// "easy" or "hard"; ConfigError otherwise.
DifficultyConfig difficulty_preset(std::string_view name);

/// Text-unit boxes plus ground-truth reading order. Blocks partition the unit
/// indices and list each block's units row-major (left to right, then down).
struct Scene {
  std::vector<UnitBox> units;
  std::vector<Block> blocks;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Deterministic in (seed, cfg). Throws InfeasibleError when the requested
/// blocks cannot be placed within the retry budget.
Scene generate_scene(std::uint64_t seed, const DifficultyConfig& cfg);

/// Scenes for seeds first_seed, first_seed + 1, ...
std::vector<Scene> generate_corpus(std::uint64_t first_seed, std::size_t count,
                                   const DifficultyConfig& cfg);

/// Throws ConfigError unless boxes lie in [0,1]^2 with positive area and
/// blocks partition the units.
void validate_scene(const Scene& scene);

struct RasterConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t levels = 2;
};

inline constexpr std::size_t kFeatureChannels = 4;

/// Level 0 is height x width, each further level halves both sides.
/// Channels: 0 count of boxes overlapping the cell with positive area,
/// 1 normalized cell-centre x, 2 normalized cell-centre y, 3 mean height of
/// the overlapping boxes (0 if none).
FeaturePyramid<double> rasterize(const Scene& scene, const RasterConfig& cfg = {});

template <class T>
FeaturePyramid<T> cast_pyramid(const FeaturePyramid<double>& pyramid) {
  FeaturePyramid<T> out;
  out.reserve(pyramid.size());
  for (const auto& level : pyramid) out.push_back(level.template cast<T>());
  return out;
}

}  // namespace ctbg
