// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "eqscene/core/tensor.hpp"
#include "eqscene/warp/affine.hpp"

namespace eqscene::train {

/// Mean squared error over every element (batch included), accumulated in double.
double mean_squared_error(const Tensor& a, const Tensor& b);

/// Reconstruction of x2 from the transformed scene.
double loss_scene(const Tensor& x2_hat, const Tensor& x2);
/// Transformed first object code against the second object code.
double loss_equiv(std::span<const warp::AffineParams> transforms, const Tensor& z_o1, const Tensor& z_o2);
/// Background codes of the two frames.
double loss_inv(const Tensor& z_b1, const Tensor& z_b2);

struct LossWeights {
  double alpha_equiv = 1.0;
  double alpha_inv = 1.0;
};

struct LossBreakdown {
  double scene = 0.0;
  double equiv = 0.0;
  double inv = 0.0;
  double total = 0.0;
};

/// total = scene + alpha_equiv * equiv + alpha_inv * inv.
LossBreakdown loss_total(double scene, double equiv, double inv, const LossWeights& w);

}  // namespace eqscene::train
