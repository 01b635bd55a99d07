// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctbg/numcore/tensor.hpp"

namespace ctbg {

/// Continuous raster coordinate: x runs along columns, y along rows, and
/// integer values land on cell centres.
struct RasterPoint {
  double x = 0;
  double y = 0;
};

/// Multi-scale feature rasters, each [C, H, W] with the same C.
template <class T>
using FeaturePyramid = std::vector<Tensor<T>>;

/// Maps a normalized image coordinate in [0,1] onto a raster axis of `extent` cells.
inline double to_raster(double normalized, std::size_t extent) {
  return normalized * static_cast<double>(extent) - 0.5;
}

/// Bilinear interpolation of the four cells around `p`; cells outside the
/// raster contribute zero.
template <class T>
Tensor<T> bilinear_sample(const Tensor<T>& map, RasterPoint p);

/// Bilinear kernel with partial derivatives, used by the differentiable
/// samplers. Writes C channel values to `out`, d/dx and d/dy of each channel
/// to `dx`/`dy`, and the summed in-bounds corner weight (and its
/// derivatives) to `coverage[0..2]`. Any output span may be empty.
template <class T>
void bilinear_kernel(const Tensor<T>& map, T x, T y, std::span<T> out, std::span<T> dx,
                     std::span<T> dy, std::span<T> coverage);

}  // namespace ctbg
