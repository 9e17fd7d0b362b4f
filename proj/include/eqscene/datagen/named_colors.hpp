// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace eqscene::datagen {

/// One entry of the CSS4 extended named-color list (the table matplotlib ships
/// as CSS4_COLORS). Several names share an RGB value, e.g. aqua and cyan.
struct NamedColor {
  const char* name;
  std::uint8_t r, g, b;
};

inline constexpr std::size_t kNumNamedColors = 148;

const std::array<NamedColor, kNumNamedColors>& named_colors();

}  // namespace eqscene::datagen
