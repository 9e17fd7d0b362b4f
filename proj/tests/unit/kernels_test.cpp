// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "eqscene/core/rng.hpp"
#include "eqscene/kernels/conv.hpp"

using namespace eqscene;
using namespace eqscene::kernels;

namespace {

std::vector<float> random_values(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(double(a[i]) - b[i]) / std::max(1.0, std::abs(double(b[i]))));
  return worst;
}

ConvGeometry random_geometry(Rng& rng) {
  ConvGeometry g;
  g.in_c = 1 + static_cast<int>(rng.below(6));
  g.out_c = 1 + static_cast<int>(rng.below(6));
  g.kernel = 1 + static_cast<int>(rng.below(4));
  g.stride = 1 + static_cast<int>(rng.below(2));
  g.pad = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.kernel)));
  g.in_h = g.kernel + static_cast<int>(rng.below(12));
  g.in_w = g.kernel + static_cast<int>(rng.below(12));
  return g;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("geometry") {
    ConvGeometry g{3, 8, 4, 2, 1, 64, 64};
    CHECK(g.out_h() == 32);
    CHECK(g.out_w() == 32);
    CHECK(g.patch() == 48);
    CHECK(!g.is_pointwise());
    CHECK(ConvGeometry{3, 8, 1, 1, 0, 5, 5}.is_pointwise());
  }

  TEST_CASE("hand-computed convolution") {
    // 1 channel 3x3 input, 2x2 kernel of ones, no padding: sums of 2x2 windows.
    const ConvGeometry g{1, 1, 2, 1, 0, 3, 3};
    const std::vector<float> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<float> w{1, 1, 1, 1};
    const float bias = 0.5f;
    std::vector<float> y(4);
    conv2d_forward(g, 1, x.data(), w.data(), &bias, y.data());
    CHECK(y == std::vector<float>{12.5f, 16.5f, 24.5f, 28.5f});
  }

  TEST_CASE("OpenMP kernels match the serial reference") {
    Rng rng(21);
    for (int k = 0; k < 60; ++k) {
      const ConvGeometry g = random_geometry(rng);
      const int batch = 1 + static_cast<int>(rng.below(4));
      const auto x = random_values(rng, batch * g.in_item());
      const auto w = random_values(rng, g.weight_size());
      const auto bias = random_values(rng, g.out_c);
      const auto dy = random_values(rng, batch * g.out_item());
      INFO(g.str());

      std::vector<float> y1(batch * g.out_item());
      std::vector<float> y2(y1.size());
      conv2d_forward(g, batch, x.data(), w.data(), bias.data(), y1.data());
      serial::conv2d_forward(g, batch, x.data(), w.data(), bias.data(), y2.data());
      CHECK(max_rel_diff(y1, y2) < 1e-5);

      std::vector<float> dx1(x.size(), 7.f);
      std::vector<float> dx2(x.size(), 7.f);
      conv2d_backward_data(g, batch, dy.data(), w.data(), dx1.data());
      serial::conv2d_backward_data(g, batch, dy.data(), w.data(), dx2.data());
      CHECK(max_rel_diff(dx1, dx2) < 1e-5);

      std::vector<float> dw1(w.size(), 0.25f);
      std::vector<float> dw2(w.size(), 0.25f);
      std::vector<float> db1(g.out_c, 1.f);
      std::vector<float> db2(g.out_c, 1.f);
      conv2d_backward_filter(g, batch, x.data(), dy.data(), dw1.data(), db1.data());
      serial::conv2d_backward_filter(g, batch, x.data(), dy.data(), dw2.data(), db2.data());
      CHECK(max_rel_diff(dw1, dw2) < 1e-5);
      CHECK(max_rel_diff(db1, db2) < 1e-5);
    }
  }

  TEST_CASE("backward data is the adjoint of forward") {
    Rng rng(22);
    for (int k = 0; k < 20; ++k) {
      const ConvGeometry g = random_geometry(rng);
      const auto x = random_values(rng, g.in_item());
      const auto w = random_values(rng, g.weight_size());
      const auto dy = random_values(rng, g.out_item());
      std::vector<float> y(g.out_item());
      std::vector<float> dx(g.in_item());
      serial::conv2d_forward(g, 1, x.data(), w.data(), nullptr, y.data());
      serial::conv2d_backward_data(g, 1, dy.data(), w.data(), dx.data());
      double lhs = 0;
      double rhs = 0;
      for (std::size_t i = 0; i < y.size(); ++i) lhs += double(y[i]) * dy[i];
      for (std::size_t i = 0; i < x.size(); ++i) rhs += double(x[i]) * dx[i];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
    }
  }

  TEST_CASE("results do not depend on the thread count") {
    Rng rng(23);
    const ConvGeometry g{4, 6, 3, 2, 1, 17, 15};
    const int batch = 5;
    const auto x = random_values(rng, batch * g.in_item());
    const auto w = random_values(rng, g.weight_size());
    const auto dy = random_values(rng, batch * g.out_item());
    const int saved = max_threads();
    std::vector<std::vector<float>> dws;
    for (int threads : {1, 3}) {
      set_num_threads(threads);
      std::vector<float> dw(w.size());
      conv2d_backward_filter(g, batch, x.data(), dy.data(), dw.data(), nullptr);
      dws.push_back(dw);
    }
    set_num_threads(saved);
    CHECK(dws[0] == dws[1]);
  }

  TEST_CASE("results do not depend on buffer alignment") {
    Rng rng(29);
    // Small shapes take Eigen's coefficient-wise product path, larger ones the blocked GEMM.
    const std::vector<ConvGeometry> shapes = {
        {2, 3, 3, 1, 1, 5, 4}, {1, 1, 1, 1, 0, 3, 3}, {3, 16, 4, 2, 1, 64, 64}, {32, 32, 3, 1, 1, 16, 16}};
    const int batch = 2;
    for (const auto& g : shapes) {
      CAPTURE(g.str());
      const auto x = random_values(rng, batch * g.in_item());
      const auto w = random_values(rng, g.weight_size());
      const auto dy = random_values(rng, batch * g.out_item());
      std::vector<float> y_ref, dx_ref, dw_ref;
      for (int shift = 0; shift < 16; ++shift) {
        // Every buffer starts `shift` floats into its storage.
        auto place = [&](const std::vector<float>& v) {
          std::vector<float> s(v.size() + 16);
          std::copy(v.begin(), v.end(), s.begin() + shift);
          return s;
        };
        auto xs = place(x), ws = place(w), dys = place(dy);
        std::vector<float> ys(batch * g.out_item() + 16), dxs(batch * g.in_item() + 16), dws(w.size() + 16);
        conv2d_forward(g, batch, xs.data() + shift, ws.data() + shift, nullptr, ys.data() + shift);
        conv2d_backward_data(g, batch, dys.data() + shift, ws.data() + shift, dxs.data() + shift);
        conv2d_backward_filter(g, batch, xs.data() + shift, dys.data() + shift, dws.data() + shift, nullptr);
        std::vector<float> y(ys.begin() + shift, ys.begin() + shift + batch * g.out_item());
        std::vector<float> dx(dxs.begin() + shift, dxs.begin() + shift + batch * g.in_item());
        std::vector<float> dw(dws.begin() + shift, dws.begin() + shift + w.size());
        if (shift == 0) {
          y_ref = y, dx_ref = dx, dw_ref = dw;
          continue;
        }
        CAPTURE(shift);
        CHECK(y == y_ref);
        CHECK(dx == dx_ref);
        CHECK(dw == dw_ref);
      }
    }
  }
}
