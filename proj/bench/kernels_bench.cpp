// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels against their OpenMP counterparts on the shapes the
// desk model actually runs. Thread count comes from OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "eqscene/core/rng.hpp"
#include "eqscene/kernels/conv.hpp"
#include "eqscene/warp/warp.hpp"

using namespace eqscene;

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Stem convolution of the desk profile: 3 -> 16 channels, 4x4 stride 2 on 64x64.
kernels::ConvGeometry stem() { return {3, 16, 4, 2, 1, 64, 64}; }
// A residual 3x3 at the latent resolution.
kernels::ConvGeometry block() { return {32, 32, 3, 1, 1, 16, 16}; }

void conv_forward(benchmark::State& state, kernels::ConvGeometry g, bool serial) {
  const int batch = static_cast<int>(state.range(0));
  const auto x = random_values(g.in_item() * batch, 1);
  const auto w = random_values(g.weight_size(), 2);
  const auto b = random_values(static_cast<std::size_t>(g.out_c), 3);
  std::vector<float> y(g.out_item() * batch);
  for (auto _ : state) {
    if (serial) {
      kernels::serial::conv2d_forward(g, batch, x.data(), w.data(), b.data(), y.data());
    } else {
      kernels::conv2d_forward(g, batch, x.data(), w.data(), b.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void conv_backward_filter(benchmark::State& state, kernels::ConvGeometry g, bool serial) {
  const int batch = static_cast<int>(state.range(0));
  const auto x = random_values(g.in_item() * batch, 4);
  const auto dy = random_values(g.out_item() * batch, 5);
  std::vector<float> dw(g.weight_size());
  std::vector<float> db(static_cast<std::size_t>(g.out_c));
  for (auto _ : state) {
    if (serial) {
      kernels::serial::conv2d_backward_filter(g, batch, x.data(), dy.data(), dw.data(), db.data());
    } else {
      kernels::conv2d_backward_filter(g, batch, x.data(), dy.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void warp_forward(benchmark::State& state, bool serial) {
  const int batch = static_cast<int>(state.range(0));
  Tensor in(Shape{batch, 32, 16, 16});
  const auto v = random_values(in.size(), 6);
  std::copy(v.begin(), v.end(), in.data());
  std::vector<float> theta;
  Rng rng(7);
  for (int n = 0; n < batch; ++n) {
    for (float t : {0.95f, -0.2f, 0.1f, 0.2f, 0.95f, -0.1f}) theta.push_back(t + static_cast<float>(rng.uniform(-0.05, 0.05)));
  }
  Tensor out;
  for (auto _ : state) {
    if (serial) {
      warp::serial::affine_warp_forward<float>(in, theta, out);
    } else {
      warp::affine_warp_forward<float>(in, theta, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

}  // namespace

BENCHMARK_CAPTURE(conv_forward, stem_serial, stem(), true)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_forward, stem_omp, stem(), false)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_forward, block_serial, block(), true)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_forward, block_omp, block(), false)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward_filter, block_serial, block(), true)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward_filter, block_omp, block(), false)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(warp_forward, serial, true)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(warp_forward, omp, false)->Arg(16)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
