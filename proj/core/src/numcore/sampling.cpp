// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "ctbg/error.hpp"

namespace ctbg {

template <class T>
void bilinear_kernel(const Tensor<T>& map, T x, T y, std::span<T> out, std::span<T> dx,
                     std::span<T> dy, std::span<T> coverage) {
  if (map.shape.size() != 3) throw ShapeError("bilinear sampling needs a [C,H,W] map");
  const std::size_t channels = map.shape[0];
  const auto height = static_cast<long>(map.shape[1]);
  const auto width = static_cast<long>(map.shape[2]);
  std::fill(out.begin(), out.end(), T{0});
  std::fill(dx.begin(), dx.end(), T{0});
  std::fill(dy.begin(), dy.end(), T{0});
  std::fill(coverage.begin(), coverage.end(), T{0});

  const T fx = std::floor(x), fy = std::floor(y);
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const T ax = x - fx, ay = y - fy;
  const std::size_t plane = static_cast<std::size_t>(height * width);

  for (int corner = 0; corner < 4; ++corner) {
    const long cx = x0 + (corner & 1);
    const long cy = y0 + (corner >> 1);
    if (cx < 0 || cy < 0 || cx >= width || cy >= height) continue;
    const T wx = (corner & 1) ? ax : T{1} - ax;
    const T wy = (corner >> 1) ? ay : T{1} - ay;
    const T sx = (corner & 1) ? T{1} : T{-1};  // d wx / dx
    const T sy = (corner >> 1) ? T{1} : T{-1};
    const T w = wx * wy;
    const std::size_t cell = static_cast<std::size_t>(cy * width + cx);
    for (std::size_t c = 0; c < channels; ++c) {
      const T v = map.data[c * plane + cell];
      if (!out.empty()) out[c] += w * v;
      if (!dx.empty()) dx[c] += sx * wy * v;
      if (!dy.empty()) dy[c] += wx * sy * v;
    }
    if (!coverage.empty()) {
      coverage[0] += w;
      coverage[1] += sx * wy;
      coverage[2] += wx * sy;
    }
  }
}

template <class T>
Tensor<T> bilinear_sample(const Tensor<T>& map, RasterPoint p) {
  if (map.shape.size() != 3 || map.size() == 0) throw ShapeError("bilinear_sample: empty map");
  Tensor<T> out(Shape{map.shape[0]});
  bilinear_kernel<T>(map, static_cast<T>(p.x), static_cast<T>(p.y), out.data, {}, {}, {});
  return out;
}

template Tensor<float> bilinear_sample<float>(const Tensor<float>&, RasterPoint);
template Tensor<double> bilinear_sample<double>(const Tensor<double>&, RasterPoint);
template void bilinear_kernel<float>(const Tensor<float>&, float, float, std::span<float>,
                                     std::span<float>, std::span<float>, std::span<float>);
template void bilinear_kernel<double>(const Tensor<double>&, double, double, std::span<double>,
                                      std::span<double>, std::span<double>, std::span<double>);

}  // namespace ctbg
