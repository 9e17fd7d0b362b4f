// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eqscene/core/tensor.hpp"

namespace eqscene {

struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// Item 0 of a (N, 3, H, W) or (N, 1, H, W) tensor in [0, 1], rounded to 8 bits.
Image8 to_image8(const Tensor& t);

void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

}  // namespace eqscene
