// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace eqscene::datagen {

enum class Split { train, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

inline constexpr int kDigitSize = 28;

/// A 28x28 MNIST digit with intensities scaled to [0, 1].
struct DigitSprite {
  std::array<float, kDigitSize * kDigitSize> intensity{};
  int label = 0;
  Split split = Split::train;
  int source_index = 0;

  float at(int x, int y) const { return intensity[static_cast<std::size_t>(y) * kDigitSize + x]; }
};

struct MnistData {
  std::vector<DigitSprite> train;
  std::vector<DigitSprite> test;

  const std::vector<DigitSprite>& split(Split s) const { return s == Split::train ? train : test; }
};

/// Reads an IDX3 image file and its IDX1 label file (plain or gzip).
/// Throws DataFormatError on a bad magic number, truncation, unexpected
/// dimensions, out-of-range labels or an image/label count mismatch.
std::vector<DigitSprite> read_idx_pair(const std::filesystem::path& images,
                                       const std::filesystem::path& labels, Split split);

/// Loads {train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz] from a directory.
MnistData load_mnist(const std::filesystem::path& dir);

/// Writes sprites as an uncompressed IDX3/IDX1 pair (intensities re-quantized to bytes).
void write_idx_pair(const std::vector<DigitSprite>& sprites, const std::filesystem::path& images,
                    const std::filesystem::path& labels);

}  // namespace eqscene::datagen
