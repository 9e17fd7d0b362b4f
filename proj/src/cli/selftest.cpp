// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <ostream>

#include "eqscene/cli/cli.hpp"
#include "eqscene/core/rng.hpp"
#include "eqscene/train/losses.hpp"
#include "eqscene/warp/warp.hpp"

namespace eqscene::cli {

namespace {

// Direct bilinear lookup, written out per output pixel in double precision.
double brute_sample(const TensorD& in, int n, int c, const std::array<double, 6>& t, int x, int y) {
  const int w = in.w();
  const int h = in.h();
  const double xn = (2.0 * x + 1.0) / w - 1.0;
  const double yn = (2.0 * y + 1.0) / h - 1.0;
  const double px = ((t[0] * xn + t[1] * yn + t[2] + 1.0) * w - 1.0) / 2.0;
  const double py = ((t[3] * xn + t[4] * yn + t[5] + 1.0) * h - 1.0) / 2.0;
  const double x0 = std::floor(px);
  const double y0 = std::floor(py);
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int xi = static_cast<int>(x0) + dx;
      const int yi = static_cast<int>(y0) + dy;
      if (xi < 0 || yi < 0 || xi >= w || yi >= h) continue;
      const double wx = dx ? px - x0 : 1.0 - (px - x0);
      const double wy = dy ? py - y0 : 1.0 - (py - y0);
      acc += wx * wy * in(n, c, yi, xi);
    }
  return acc;
}

}  // namespace

int selftest(std::ostream& out) {
  int failures = 0;
  int checks = 0;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failures;
      out << "FAIL " << what << '\n';
    }
  };

  Rng rng(2024, 7);
  for (int k = 0; k < 200; ++k) {
    const Shape s{1, 1 + static_cast<int>(rng.below(4)), 2 + static_cast<int>(rng.below(15)), 2 + static_cast<int>(rng.below(15))};
    Tensor map(s);
    TensorD mapd(s);
    for (std::size_t i = 0; i < map.size(); ++i) {
      map[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
      mapd[i] = map[i];
    }
    std::array<double, 6> t{};
    for (double& v : t) v = rng.uniform(-1.5, 1.5);
    const auto a = warp::AffineParams::from_coefficients(t, warp::CoordFrame::normalized);
    const Tensor got = warp::affine_warp(map, a);
    double worst = 0.0;
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) worst = std::max(worst, std::abs(got(0, c, y, x) - brute_sample(mapd, 0, c, t, x, y)));
    expect(worst < 1e-5, "warp case " + std::to_string(k) + " max error " + std::to_string(worst));
  }

  for (int k = 0; k < 10; ++k) {
    const Shape s{1, 2, 6, 7};
    TensorD map(s);
    TensorD g(s);
    for (std::size_t i = 0; i < map.size(); ++i) {
      map[i] = rng.uniform(-1.0, 1.0);
      g[i] = rng.uniform(-1.0, 1.0);
    }
    std::array<double, 6> t{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
    for (double& v : t) v += rng.uniform(-0.3, 0.3);
    auto objective = [&](const std::array<double, 6>& th) {
      TensorD o;
      warp::affine_warp_forward<double>(map, std::span<const double>(th.data(), 6), o);
      double acc = 0.0;
      for (std::size_t i = 0; i < o.size(); ++i) acc += o[i] * g[i];
      return acc;
    };
    std::array<double, 6> grad{};
    warp::affine_warp_backward<double>(map, std::span<const double>(t.data(), 6), g, nullptr, std::span<double>(grad.data(), 6));
    for (int p = 0; p < 6; ++p) {
      auto up = t;
      auto dn = t;
      up[p] += 1e-6;
      dn[p] -= 1e-6;
      const double fd = (objective(up) - objective(dn)) / 2e-6;
      expect(std::abs(fd - grad[p]) <= 1e-3 * std::max(1.0, std::abs(fd)),
             "warp theta gradient " + std::to_string(k) + "/" + std::to_string(p));
    }
  }

  Tensor zeros(Shape{1, 3, 8, 8});
  Tensor halves(zeros.shape());
  halves.fill(0.5f);
  expect(train::mean_squared_error(zeros, halves) == 0.25, "mse of 0 vs 0.5");
  expect(train::loss_inv(halves, halves) == 0.0, "invariance loss of identical codes");
  const auto total = train::loss_total(0.1, 0.2, 0.3, {1.0, 1.0});
  expect(std::abs(total.total - 0.6) < 1e-12, "loss additivity");
  expect(train::loss_total(0.1, 0.2, 0.3, {0.0, 0.0}).total == 0.1, "zero weights keep the scene term");

  out << "selftest: " << checks - failures << "/" << checks << " checks passed\n";
  return failures;
}

}  // namespace eqscene::cli
