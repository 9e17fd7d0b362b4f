#!/usr/bin/env python3
# Copyright 2026 The eqscene Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates src/datagen/named_colors.cpp from matplotlib's CSS4 color table."""
import sys

import matplotlib.colors as mcolors

HEADER = """// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generated by scripts/gen_named_colors.py. Do not edit.

#include "eqscene/datagen/named_colors.hpp"

namespace eqscene::datagen {

const std::array<NamedColor, kNumNamedColors>& named_colors() {
  static const std::array<NamedColor, kNumNamedColors> table = {{
"""

FOOTER = """  }};
  return table;
}

}  // namespace eqscene::datagen
"""


def main(out_path):
    items = sorted(mcolors.CSS4_COLORS.items())
    assert len(items) == 148
    with open(out_path, "w") as f:
        f.write(HEADER)
        for name, hexval in items:
            r, g, b = (int(hexval[i:i + 2], 16) for i in (1, 3, 5))
            f.write(f'      {{"{name}", {r}, {g}, {b}}},\n')
        f.write(FOOTER)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/datagen/named_colors.cpp")
