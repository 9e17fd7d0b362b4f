// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/warp/warp.hpp"

namespace eqscene::warp {

Grid2D affine_grid(const AffineParams& a, int height, int width) {
  if (a.frame != CoordFrame::normalized) throw ContractError("affine_grid expects a normalized-frame map");
  if (height <= 0 || width <= 0) throw ContractError("affine_grid: non-positive grid size");
  Grid2D g{height, width, {}};
  g.samples.reserve(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point p = a.apply({pixel_center<double>(x, width), pixel_center<double>(y, height)});
      g.samples.push_back({p.x, p.y});
    }
  }
  return g;
}

Tensor grid_sample(const Tensor& map, const Grid2D& grid) {
  if (grid.samples.size() != static_cast<std::size_t>(grid.height) * grid.width) {
    throw ContractError("grid_sample: grid has wrong number of samples");
  }
  const Shape s = map.shape();
  Tensor out(Shape{s.n, s.c, grid.height, grid.width});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float* plane = &map(n, c, 0, 0);
      for (int i = 0; i < grid.height * grid.width; ++i) {
        const float px = unnormalize(static_cast<float>(grid.samples[i][0]), s.w);
        const float py = unnormalize(static_cast<float>(grid.samples[i][1]), s.h);
        const float x0 = std::floor(px);
        const float y0 = std::floor(py);
        const detail::Tap<float> t{static_cast<int>(x0), static_cast<int>(y0), px - x0, py - y0, 0.f, 0.f};
        out(n, c, i / grid.width, i % grid.width) = detail::sample(plane, t, s.w, s.h);
      }
    }
  }
  return out;
}

namespace {

template <typename T>
BasicTensor<T> warp_broadcast(const BasicTensor<T>& map, const AffineParams& a) {
  std::vector<AffineParams> params(static_cast<std::size_t>(map.n()), a);
  const auto theta = pack_coefficients<T>(params);
  BasicTensor<T> out;
  affine_warp_forward<T>(map, theta, out);
  return out;
}

}  // namespace

Tensor affine_warp(const Tensor& map, const AffineParams& a) { return warp_broadcast(map, a); }
TensorD affine_warp(const TensorD& map, const AffineParams& a) { return warp_broadcast(map, a); }

Tensor affine_warp(const Tensor& map, std::span<const AffineParams> params) {
  if (params.size() != static_cast<std::size_t>(map.n())) {
    throw ContractError("affine_warp: one parameter set per batch item required");
  }
  const auto theta = pack_coefficients<float>(params);
  Tensor out;
  affine_warp_forward<float>(map, theta, out);
  return out;
}

}  // namespace eqscene::warp
