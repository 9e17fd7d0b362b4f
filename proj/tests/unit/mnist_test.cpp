// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "eqscene/core/error.hpp"
#include "eqscene/datagen/mnist.hpp"
#include "support/oracles.hpp"

using namespace eqscene;
using namespace eqscene::datagen;
namespace fs = std::filesystem;

namespace {

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

// Raw IDX writer: header fields as given, then `payload` bytes of value `fill`.
void write_images(const fs::path& p, std::uint32_t magic, std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                  std::size_t payload, char fill = 0) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  const std::string body(payload, fill);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

void write_labels(const fs::path& p, std::uint32_t magic, std::uint32_t count, std::size_t payload, char fill = 3) {
  std::ofstream out(p, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  const std::string body(payload, fill);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

std::uint32_t gz_header_count(const fs::path& p) {
  gzFile f = gzopen(p.string().c_str(), "rb");
  REQUIRE(f != nullptr);
  unsigned char b[8];
  REQUIRE(gzread(f, b, 8) == 8);
  gzclose(f);
  return (std::uint32_t(b[4]) << 24) | (std::uint32_t(b[5]) << 16) | (std::uint32_t(b[6]) << 8) | b[7];
}

}  // namespace

TEST_SUITE("mnist") {
  TEST_CASE("synthetic standard-size headers") {
    const auto dir = oracle::temp_dir("mnist_sizes");
    for (std::uint32_t n : {60000u, 10000u}) {
      write_images(dir / "im", 0x803, n, 28, 28, std::size_t(n) * 784, 0x40);
      write_labels(dir / "lb", 0x801, n, n);
      const auto sprites = read_idx_pair(dir / "im", dir / "lb", Split::test);
      CHECK(sprites.size() == n);
      CHECK(sprites.back().label == 3);
      CHECK(sprites.back().split == Split::test);
      CHECK(sprites.back().source_index == int(n) - 1);
      CHECK(sprites[0].at(5, 5) == doctest::Approx(64.0 / 255.0));
    }
  }

  TEST_CASE("standard files in the repository") {
    const fs::path dir = EQSCENE_MNIST_DIR;
    const auto data = load_mnist(dir);
    CHECK(data.train.size() == gz_header_count(dir / "train-images-idx3-ubyte.gz"));
    CHECK(data.test.size() == gz_header_count(dir / "t10k-images-idx3-ubyte.gz"));
    CHECK(data.train.size() == 60000);
    CHECK(data.test.size() == 10000);
    for (const auto& s : data.train) {
      REQUIRE(s.label >= 0);
      REQUIRE(s.label <= 9);
    }
  }

  TEST_CASE("malformed files are rejected") {
    const auto dir = oracle::temp_dir("mnist_bad");
    write_labels(dir / "lb", 0x801, 4, 4);
    SUBCASE("wrong image magic") {
      write_images(dir / "im", 0x802, 4, 28, 28, 4 * 784);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("wrong label magic") {
      write_images(dir / "im", 0x803, 4, 28, 28, 4 * 784);
      write_labels(dir / "lb", 0x803, 4, 4);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("truncated images") {
      write_images(dir / "im", 0x803, 4, 28, 28, 3 * 784 + 100);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("wrong dimensions") {
      write_images(dir / "im", 0x803, 4, 32, 32, 4 * 1024);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("count mismatch") {
      write_images(dir / "im", 0x803, 5, 28, 28, 5 * 784);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("label out of range") {
      write_images(dir / "im", 0x803, 4, 28, 28, 4 * 784);
      write_labels(dir / "lb", 0x801, 4, 4, 12);
      CHECK_THROWS_AS(read_idx_pair(dir / "im", dir / "lb", Split::train), DataFormatError);
    }
    SUBCASE("missing directory") { CHECK_THROWS_AS(load_mnist(dir / "nope"), DataFormatError); }
  }

  TEST_CASE("write and read round trip") {
    const auto dir = oracle::temp_dir("mnist_rt");
    std::vector<DigitSprite> sprites(3);
    for (int k = 0; k < 3; ++k) {
      sprites[k].label = k + 4;
      for (int i = 0; i < 784; ++i) sprites[k].intensity[i] = float((i * 7 + k) % 256) / 255.f;
    }
    write_idx_pair(sprites, dir / "im", dir / "lb");
    const auto back = read_idx_pair(dir / "im", dir / "lb", Split::train);
    REQUIRE(back.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(back[k].label == k + 4);
      CHECK(back[k].intensity == sprites[k].intensity);
    }
  }
}
