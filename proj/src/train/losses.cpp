// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/train/losses.hpp"

#include "eqscene/warp/warp.hpp"

namespace eqscene::train {

double mean_squared_error(const Tensor& a, const Tensor& b) {
  require_shape(b.shape(), a.shape(), "mean_squared_error");
  if (a.empty()) throw ContractError("mean_squared_error: empty tensors");
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double loss_scene(const Tensor& x2_hat, const Tensor& x2) { return mean_squared_error(x2_hat, x2); }

double loss_equiv(std::span<const warp::AffineParams> transforms, const Tensor& z_o1, const Tensor& z_o2) {
  return mean_squared_error(warp::affine_warp(z_o1, transforms), z_o2);
}

double loss_inv(const Tensor& z_b1, const Tensor& z_b2) { return mean_squared_error(z_b1, z_b2); }

LossBreakdown loss_total(double scene, double equiv, double inv, const LossWeights& w) {
  if (w.alpha_equiv < 0.0 || w.alpha_inv < 0.0) throw ContractError("loss weights must be non-negative");
  return {scene, equiv, inv, scene + w.alpha_equiv * equiv + w.alpha_inv * inv};
}

}  // namespace eqscene::train
