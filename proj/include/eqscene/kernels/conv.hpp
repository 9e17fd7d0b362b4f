// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// 2D convolution kernels over NCHW float buffers.
//
// The default kernels lower each batch item to an im2col matrix and multiply
// with Eigen, parallelizing over batch items with OpenMP. Filter gradients are
// computed per item and reduced in item order, so results do not depend on the
// thread count. The `serial` namespace holds direct-loop reference versions
// used by tests and the benchmark.

#pragma once

#include <cstddef>
#include <string>

namespace eqscene::kernels {

struct ConvGeometry {
  int in_c = 0;
  int out_c = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int in_h = 0;
  int in_w = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  int patch() const { return in_c * kernel * kernel; }
  std::size_t in_item() const { return static_cast<std::size_t>(in_c) * in_h * in_w; }
  std::size_t out_item() const { return static_cast<std::size_t>(out_c) * out_h() * out_w(); }
  std::size_t weight_size() const { return static_cast<std::size_t>(out_c) * patch(); }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }

  std::string str() const;
};

/// y = conv(x, w) + bias. Weights are (out_c, in_c, k, k); bias may be null.
void conv2d_forward(const ConvGeometry& g, int batch, const float* x, const float* w,
                    const float* bias, float* y);

/// dx = conv_transpose(dy, w). Overwrites dx.
void conv2d_backward_data(const ConvGeometry& g, int batch, const float* dy, const float* w, float* dx);

/// dw += sum_b dy_b * im2col(x_b)^T, db += per-channel sums of dy (db may be null).
void conv2d_backward_filter(const ConvGeometry& g, int batch, const float* x, const float* dy,
                            float* dw, float* db);

namespace serial {

void conv2d_forward(const ConvGeometry& g, int batch, const float* x, const float* w,
                    const float* bias, float* y);
void conv2d_backward_data(const ConvGeometry& g, int batch, const float* dy, const float* w, float* dx);
void conv2d_backward_filter(const ConvGeometry& g, int batch, const float* x, const float* dy,
                            float* dw, float* db);

}  // namespace serial

/// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int max_threads();
void set_num_threads(int n);

}  // namespace eqscene::kernels
