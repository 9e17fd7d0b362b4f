// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/datagen/mnist.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "eqscene/core/error.hpp"

namespace eqscene::datagen {

namespace fs = std::filesystem;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw DataFormatError("unknown split '" + s + "'");
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// gzread passes uncompressed files through unchanged.
std::vector<std::uint8_t> read_maybe_gzip(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataFormatError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataFormatError("corrupt gzip stream in " + path.string());
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const fs::path& path) {
  if (off + 4 > b.size()) throw DataFormatError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

fs::path find_file(const fs::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"}) {
    if (fs::exists(dir / name)) return dir / name;
  }
  throw DataFormatError("missing MNIST file " + (dir / stem).string() + "[.gz]");
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

std::vector<DigitSprite> read_idx_pair(const fs::path& images, const fs::path& labels, Split split) {
  const auto img = read_maybe_gzip(images);
  const auto lab = read_maybe_gzip(labels);

  if (read_be32(img, 0, images) != kImageMagic) {
    throw DataFormatError("bad magic number in " + images.string() + " (expected 0x00000803)");
  }
  if (read_be32(lab, 0, labels) != kLabelMagic) {
    throw DataFormatError("bad magic number in " + labels.string() + " (expected 0x00000801)");
  }
  const std::uint32_t count = read_be32(img, 4, images);
  const std::uint32_t rows = read_be32(img, 8, images);
  const std::uint32_t cols = read_be32(img, 12, images);
  const std::uint32_t label_count = read_be32(lab, 4, labels);
  if (rows != kDigitSize || cols != kDigitSize) {
    throw DataFormatError("expected 28x28 images in " + images.string() + ", got " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (count != label_count) {
    throw DataFormatError("image/label count mismatch: " + std::to_string(count) + " images vs " +
                          std::to_string(label_count) + " labels");
  }
  constexpr std::size_t pixels = kDigitSize * kDigitSize;
  if (img.size() < 16 + static_cast<std::size_t>(count) * pixels) {
    throw DataFormatError("truncated image data in " + images.string());
  }
  if (lab.size() < 8 + static_cast<std::size_t>(count)) {
    throw DataFormatError("truncated label data in " + labels.string());
  }

  std::vector<DigitSprite> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    DigitSprite& d = out[i];
    const std::uint8_t* src = img.data() + 16 + static_cast<std::size_t>(i) * pixels;
    for (std::size_t p = 0; p < pixels; ++p) d.intensity[p] = static_cast<float>(src[p]) / 255.0f;
    d.label = lab[8 + i];
    if (d.label > 9) throw DataFormatError("label out of range at index " + std::to_string(i));
    d.split = split;
    d.source_index = static_cast<int>(i);
  }
  return out;
}

MnistData load_mnist(const fs::path& dir) {
  MnistData m;
  m.train = read_idx_pair(find_file(dir, "train-images-idx3-ubyte"), find_file(dir, "train-labels-idx1-ubyte"),
                          Split::train);
  m.test = read_idx_pair(find_file(dir, "t10k-images-idx3-ubyte"), find_file(dir, "t10k-labels-idx1-ubyte"),
                         Split::test);
  return m;
}

void write_idx_pair(const std::vector<DigitSprite>& sprites, const fs::path& images, const fs::path& labels) {
  std::ofstream im(images, std::ios::binary);
  std::ofstream lb(labels, std::ios::binary);
  if (!im || !lb) throw RuntimeError("cannot write IDX files next to " + images.string());
  write_be32(im, kImageMagic);
  write_be32(im, static_cast<std::uint32_t>(sprites.size()));
  write_be32(im, kDigitSize);
  write_be32(im, kDigitSize);
  write_be32(lb, kLabelMagic);
  write_be32(lb, static_cast<std::uint32_t>(sprites.size()));
  for (const auto& s : sprites) {
    for (float v : s.intensity) im.put(static_cast<char>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f)));
    lb.put(static_cast<char>(s.label));
  }
}

}  // namespace eqscene::datagen
