// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/kernels/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eqscene::kernels {

namespace {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

// cols is (patch x out_h*out_w), rows ordered (c, ki, kj).
void im2col(const ConvGeometry& g, const float* x, float* cols) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  for (int c = 0; c < g.in_c; ++c) {
    const float* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* row = cols + (static_cast<std::size_t>(c * k + ki) * k + kj) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          float* out = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(out, out + ow, 0.f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            out[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.f;
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const float* cols, float* x) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  std::fill(x, x + g.in_item(), 0.f);
  for (int c = 0; c < g.in_c; ++c) {
    float* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* row = cols + (static_cast<std::size_t>(c * k + ki) * k + kj) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.in_h) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          const float* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

std::size_t cols_size(const ConvGeometry& g) {
  return g.is_pointwise() ? 0 : static_cast<std::size_t>(g.patch()) * g.out_h() * g.out_w();
}

}  // namespace

std::string ConvGeometry::str() const {
  return "conv(" + std::to_string(in_c) + "->" + std::to_string(out_c) + ", k" + std::to_string(kernel) +
         " s" + std::to_string(stride) + " p" + std::to_string(pad) + ", " + std::to_string(in_h) + "x" +
         std::to_string(in_w) + ")";
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void conv2d_forward(const ConvGeometry& g, int batch, const float* x, const float* w,
                    const float* bias, float* y) {
  const int p = g.out_h() * g.out_w();
  const ConstMatMap wm(w, g.out_c, g.patch());
#pragma omp parallel
  {
    std::vector<float> cols(cols_size(g));
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      const float* xb = x + b * g.in_item();
      const float* colp = xb;
      if (!g.is_pointwise()) {
        im2col(g, xb, cols.data());
        colp = cols.data();
      }
      MatMap ym(y + b * g.out_item(), g.out_c, p);
      ym.noalias() = wm * ConstMatMap(colp, g.patch(), p);
      if (bias != nullptr) {
        for (int o = 0; o < g.out_c; ++o) ym.row(o).array() += bias[o];
      }
    }
  }
}

void conv2d_backward_data(const ConvGeometry& g, int batch, const float* dy, const float* w, float* dx) {
  const int p = g.out_h() * g.out_w();
  const ConstMatMap wm(w, g.out_c, g.patch());
#pragma omp parallel
  {
    std::vector<float> cols(cols_size(g));
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      const ConstMatMap dym(dy + b * g.out_item(), g.out_c, p);
      float* dxb = dx + b * g.in_item();
      if (g.is_pointwise()) {
        MatMap(dxb, g.in_c, p).noalias() = wm.transpose() * dym;
      } else {
        MatMap(cols.data(), g.patch(), p).noalias() = wm.transpose() * dym;
        col2im(g, cols.data(), dxb);
      }
    }
  }
}

void conv2d_backward_filter(const ConvGeometry& g, int batch, const float* x, const float* dy,
                            float* dw, float* db) {
  const int p = g.out_h() * g.out_w();
  const std::size_t wsize = g.weight_size();
  std::vector<float> partial(static_cast<std::size_t>(batch) * wsize);
#pragma omp parallel
  {
    std::vector<float> cols(cols_size(g));
#pragma omp for schedule(static)
    for (int b = 0; b < batch; ++b) {
      const float* xb = x + b * g.in_item();
      const float* colp = xb;
      if (!g.is_pointwise()) {
        im2col(g, xb, cols.data());
        colp = cols.data();
      }
      MatMap(partial.data() + b * wsize, g.out_c, g.patch()).noalias() =
          ConstMatMap(dy + b * g.out_item(), g.out_c, p) * ConstMatMap(colp, g.patch(), p).transpose();
    }
  }
  // Fixed-order reduction keeps the result independent of the thread count.
  for (int b = 0; b < batch; ++b) {
    const float* src = partial.data() + b * wsize;
    for (std::size_t i = 0; i < wsize; ++i) dw[i] += src[i];
  }
  if (db != nullptr) {
    for (int b = 0; b < batch; ++b) {
      for (int o = 0; o < g.out_c; ++o) {
        const float* row = dy + b * g.out_item() + static_cast<std::size_t>(o) * p;
        float s = 0.f;
        for (int i = 0; i < p; ++i) s += row[i];
        db[o] += s;
      }
    }
  }
}

namespace serial {

void conv2d_forward(const ConvGeometry& g, int batch, const float* x, const float* w,
                    const float* bias, float* y) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  for (int b = 0; b < batch; ++b)
    for (int o = 0; o < g.out_c; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias != nullptr ? bias[o] : 0.0;
          for (int c = 0; c < g.in_c; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int iy = oy * g.stride - g.pad + ki;
                const int ix = ox * g.stride - g.pad + kj;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += static_cast<double>(w[((o * g.in_c + c) * k + ki) * k + kj]) *
                       x[b * g.in_item() + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix];
              }
          y[b * g.out_item() + (static_cast<std::size_t>(o) * oh + oy) * ow + ox] = static_cast<float>(acc);
        }
}

void conv2d_backward_data(const ConvGeometry& g, int batch, const float* dy, const float* w, float* dx) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  std::vector<double> acc(g.in_item());
  for (int b = 0; b < batch; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int o = 0; o < g.out_c; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const double gv = dy[b * g.out_item() + (static_cast<std::size_t>(o) * oh + oy) * ow + ox];
          for (int c = 0; c < g.in_c; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int iy = oy * g.stride - g.pad + ki;
                const int ix = ox * g.stride - g.pad + kj;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc[(static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix] +=
                    gv * w[((o * g.in_c + c) * k + ki) * k + kj];
              }
        }
    for (std::size_t i = 0; i < acc.size(); ++i) dx[b * g.in_item() + i] = static_cast<float>(acc[i]);
  }
}

void conv2d_backward_filter(const ConvGeometry& g, int batch, const float* x, const float* dy,
                            float* dw, float* db) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int k = g.kernel;
  for (int o = 0; o < g.out_c; ++o) {
    for (int c = 0; c < g.in_c; ++c)
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          double acc = 0.0;
          for (int b = 0; b < batch; ++b)
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                const int iy = oy * g.stride - g.pad + ki;
                const int ix = ox * g.stride - g.pad + kj;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += static_cast<double>(dy[b * g.out_item() + (static_cast<std::size_t>(o) * oh + oy) * ow + ox]) *
                       x[b * g.in_item() + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix];
              }
          dw[((o * g.in_c + c) * k + ki) * k + kj] += static_cast<float>(acc);
        }
    if (db != nullptr) {
      double s = 0.0;
      for (int b = 0; b < batch; ++b)
        for (int i = 0; i < oh * ow; ++i) s += dy[b * g.out_item() + static_cast<std::size_t>(o) * oh * ow + i];
      db[o] += static_cast<float>(s);
    }
  }
}

}  // namespace serial

}  // namespace eqscene::kernels
