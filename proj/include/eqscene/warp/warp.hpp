// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Spatial-transformer style sampling: an affine map in the normalized frame
// takes each output pixel to a source location, and the output takes the
// bilinearly interpolated input value there (inverse warp). Samples outside
// the input read as zero. Both the input map and the six affine coefficients
// receive gradients.

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "eqscene/core/tensor.hpp"
#include "eqscene/warp/affine.hpp"

namespace eqscene::warp {

/// Per-output-pixel source coordinates in the normalized frame, row-major.
struct Grid2D {
  int height = 0;
  int width = 0;
  std::vector<std::array<double, 2>> samples;
};

/// Normalized coordinate of pixel index k on an axis of `extent` pixels.
template <typename T>
inline T pixel_center(int k, int extent) {
  return (T(2) * k + T(1)) / T(extent) - T(1);
}

/// Continuous pixel index of normalized coordinate u.
template <typename T>
inline T unnormalize(T u, int extent) {
  return ((u + T(1)) * T(extent) - T(1)) / T(2);
}

Grid2D affine_grid(const AffineParams& a, int height, int width);

/// Samples every item of `map` at the grid locations; output is (N, C, grid.height, grid.width).
Tensor grid_sample(const Tensor& map, const Grid2D& grid);

/// Warps every item with the same normalized-frame map. Throws on pixel-frame input.
Tensor affine_warp(const Tensor& map, const AffineParams& a);
TensorD affine_warp(const TensorD& map, const AffineParams& a);

/// Warps item n of `map` with params[n]; `params` has one entry per item.
Tensor affine_warp(const Tensor& map, std::span<const AffineParams> params);

/// Row-major coefficients of a batch of normalized-frame maps, 6 per item.
template <typename T>
std::vector<T> pack_coefficients(std::span<const AffineParams> params) {
  std::vector<T> theta;
  theta.reserve(params.size() * 6);
  for (const auto& a : params) {
    if (a.frame != CoordFrame::normalized) {
      throw ContractError("affine warp expects normalized-frame parameters");
    }
    for (double v : a.coefficients()) theta.push_back(static_cast<T>(v));
  }
  return theta;
}

namespace detail {

template <typename T>
struct Tap {
  int x0;
  int y0;
  T fx;  // fractional offset of px from x0
  T fy;
  T xn;  // normalized output coordinate (for parameter gradients)
  T yn;
};

template <typename T>
inline Tap<T> make_tap(const T* th, int x, int y, int w, int h) {
  const T xn = pixel_center<T>(x, w);
  const T yn = pixel_center<T>(y, h);
  const T u = th[0] * xn + th[1] * yn + th[2];
  const T v = th[3] * xn + th[4] * yn + th[5];
  const T px = unnormalize(u, w);
  const T py = unnormalize(v, h);
  const T fx0 = std::floor(px);
  const T fy0 = std::floor(py);
  return {static_cast<int>(fx0), static_cast<int>(fy0), px - fx0, py - fy0, xn, yn};
}

template <typename T>
inline T read_or_zero(const T* plane, int x, int y, int w, int h) {
  return (x >= 0 && x < w && y >= 0 && y < h) ? plane[static_cast<std::size_t>(y) * w + x] : T(0);
}

template <typename T>
inline T sample(const T* plane, const Tap<T>& t, int w, int h) {
  const T v00 = read_or_zero(plane, t.x0, t.y0, w, h);
  const T v01 = read_or_zero(plane, t.x0 + 1, t.y0, w, h);
  const T v10 = read_or_zero(plane, t.x0, t.y0 + 1, w, h);
  const T v11 = read_or_zero(plane, t.x0 + 1, t.y0 + 1, w, h);
  return (T(1) - t.fy) * ((T(1) - t.fx) * v00 + t.fx * v01) + t.fy * ((T(1) - t.fx) * v10 + t.fx * v11);
}

template <typename T>
inline void scatter(T* plane, const Tap<T>& t, int w, int h, T g) {
  auto add = [&](int x, int y, T wgt) {
    if (x >= 0 && x < w && y >= 0 && y < h) plane[static_cast<std::size_t>(y) * w + x] += g * wgt;
  };
  add(t.x0, t.y0, (T(1) - t.fx) * (T(1) - t.fy));
  add(t.x0 + 1, t.y0, t.fx * (T(1) - t.fy));
  add(t.x0, t.y0 + 1, (T(1) - t.fx) * t.fy);
  add(t.x0 + 1, t.y0 + 1, t.fx * t.fy);
}

inline void check_theta(const Shape& s, std::size_t theta_size) {
  if (theta_size != static_cast<std::size_t>(s.n) * 6) {
    throw ContractError("affine warp: expected " + std::to_string(s.n * 6) +
                        " coefficients for batch " + s.str());
  }
}

}  // namespace detail

/// OpenMP kernel. Taps are computed once per item and shared by its channels.
template <typename T>
void affine_warp_forward(const BasicTensor<T>& in, std::span<const T> theta, BasicTensor<T>& out) {
  const Shape s = in.shape();
  detail::check_theta(s, theta.size());
  if (!(out.shape() == s)) out = BasicTensor<T>(s);
  const int hw = s.h * s.w;
  std::vector<detail::Tap<T>> taps(static_cast<std::size_t>(s.n) * hw);
#pragma omp parallel
  {
#pragma omp for
    for (int i = 0; i < s.n * hw; ++i) {
      const int n = i / hw;
      const int p = i % hw;
      taps[i] = detail::make_tap(theta.data() + 6 * n, p % s.w, p / s.w, s.w, s.h);
    }
#pragma omp for collapse(2)
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const T* src = in.data() + (static_cast<std::size_t>(n) * s.c + c) * hw;
        T* dst = out.data() + (static_cast<std::size_t>(n) * s.c + c) * hw;
        const detail::Tap<T>* tp = taps.data() + static_cast<std::size_t>(n) * hw;
        for (int p = 0; p < hw; ++p) dst[p] = detail::sample(src, tp[p], s.w, s.h);
      }
    }
  }
}

/// Accumulates into grad_in (if non-null) and grad_theta.
template <typename T>
void affine_warp_backward(const BasicTensor<T>& in, std::span<const T> theta,
                          const BasicTensor<T>& grad_out, BasicTensor<T>* grad_in,
                          std::span<T> grad_theta) {
  const Shape s = in.shape();
  detail::check_theta(s, theta.size());
  detail::check_theta(s, grad_theta.size());
  require_shape(grad_out.shape(), s, "affine_warp_backward grad_out");
  if (grad_in != nullptr && !(grad_in->shape() == s)) *grad_in = BasicTensor<T>(s);
  const int hw = s.h * s.w;
  const T half_w = T(s.w) / T(2);
  const T half_h = T(s.h) / T(2);

#pragma omp parallel for
  for (int n = 0; n < s.n; ++n) {
    const T* th = theta.data() + 6 * n;
    std::array<T, 6> acc{};
    for (int p = 0; p < hw; ++p) {
      const auto t = detail::make_tap(th, p % s.w, p / s.w, s.w, s.h);
      T dpx = 0;
      T dpy = 0;
      for (int c = 0; c < s.c; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * hw;
        const T g = grad_out.data()[off + p];
        if (g == T(0)) continue;
        const T* src = in.data() + off;
        const T v00 = detail::read_or_zero(src, t.x0, t.y0, s.w, s.h);
        const T v01 = detail::read_or_zero(src, t.x0 + 1, t.y0, s.w, s.h);
        const T v10 = detail::read_or_zero(src, t.x0, t.y0 + 1, s.w, s.h);
        const T v11 = detail::read_or_zero(src, t.x0 + 1, t.y0 + 1, s.w, s.h);
        dpx += g * ((T(1) - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
        dpy += g * ((T(1) - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
        if (grad_in != nullptr) detail::scatter(grad_in->data() + off, t, s.w, s.h, g);
      }
      const T du = dpx * half_w;
      const T dv = dpy * half_h;
      acc[0] += du * t.xn;
      acc[1] += du * t.yn;
      acc[2] += du;
      acc[3] += dv * t.xn;
      acc[4] += dv * t.yn;
      acc[5] += dv;
    }
    for (int k = 0; k < 6; ++k) grad_theta[6 * n + k] += acc[k];
  }
}

namespace serial {

/// Reference forward: recomputes the tap for every (n, c, y, x), no threading.
template <typename T>
void affine_warp_forward(const BasicTensor<T>& in, std::span<const T> theta, BasicTensor<T>& out) {
  const Shape s = in.shape();
  detail::check_theta(s, theta.size());
  out = BasicTensor<T>(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const auto t = detail::make_tap(theta.data() + 6 * n, x, y, s.w, s.h);
          out(n, c, y, x) = detail::sample(&in(n, c, 0, 0), t, s.w, s.h);
        }
}

}  // namespace serial

}  // namespace eqscene::warp
