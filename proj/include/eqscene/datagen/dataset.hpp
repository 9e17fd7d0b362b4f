// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset persistence. Layout of a dataset root:
//
//   <root>/<split>/manifest.json     config, hashes, backgrounds, recipes
//   <root>/<split>/backgrounds.bin   (64, 3, 64, 64) float32 little-endian
//   <root>/<split>/seq_<id>.bin      frames (M, 3, 64, 64) then alpha (M, 1, 64, 64)
//
// Every sequence is also described by its recipe in the manifest, so frames
// can be regenerated bit-exactly from MNIST alone.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eqscene/datagen/generator.hpp"
#include "json.hpp"

namespace eqscene::datagen {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  Split split = Split::train;
  int num_sequences = 0;
  DatasetConfig config;
  std::string config_hash;
  std::vector<SequenceRecipe> recipes;
  std::vector<std::string> paths;  // relative to the split directory

  nlohmann::json to_json(std::span<const BackgroundSpec> backgrounds) const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// Read access to a split's sequences, by id in [0, size()).
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;

  virtual int size() const = 0;
  virtual Split split() const = 0;
  virtual const DatasetConfig& config() const = 0;
  virtual const SequenceRecipe& recipe(int id) const = 0;
  virtual const std::vector<BackgroundSpec>& backgrounds() const = 0;
  virtual VideoSequence sequence(int id) const = 0;
  /// Frames i and j of a sequence, each (1, 3, canvas, canvas).
  virtual std::pair<Tensor, Tensor> frame_pair(int id, FramePair p) const = 0;
  /// Identifies the data for checkpoint compatibility checks.
  std::string fingerprint() const;
};

/// Sequences rendered on demand from recipes planned at construction.
class ProceduralDataset final : public SequenceSource {
 public:
  ProceduralDataset(const DatasetConfig& cfg, Split split, std::vector<DigitSprite> sprites, int num_sequences);

  int size() const override { return static_cast<int>(recipes_.size()); }
  Split split() const override { return split_; }
  const DatasetConfig& config() const override { return cfg_; }
  const SequenceRecipe& recipe(int id) const override { return recipes_.at(static_cast<std::size_t>(id)); }
  const std::vector<BackgroundSpec>& backgrounds() const override { return backgrounds_; }
  VideoSequence sequence(int id) const override;
  std::pair<Tensor, Tensor> frame_pair(int id, FramePair p) const override;

  const std::vector<DigitSprite>& sprites() const { return sprites_; }

 private:
  DatasetConfig cfg_;
  Split split_;
  std::vector<DigitSprite> sprites_;
  std::vector<BackgroundSpec> backgrounds_;
  std::vector<SequenceRecipe> recipes_;
};

/// A split directory written by gen_dataset; frames are read from disk lazily.
class DiskDataset final : public SequenceSource {
 public:
  static std::unique_ptr<DiskDataset> open(const std::filesystem::path& root, Split split);

  int size() const override { return manifest_.num_sequences; }
  Split split() const override { return manifest_.split; }
  const DatasetConfig& config() const override { return manifest_.config; }
  const SequenceRecipe& recipe(int id) const override { return manifest_.recipes.at(static_cast<std::size_t>(id)); }
  const std::vector<BackgroundSpec>& backgrounds() const override { return backgrounds_; }
  VideoSequence sequence(int id) const override;
  std::pair<Tensor, Tensor> frame_pair(int id, FramePair p) const override;

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
  std::vector<BackgroundSpec> backgrounds_;
};

/// Writes one split: background pool first, then sequences (in parallel,
/// each from its own stream). Deterministic given cfg.seed.
DatasetManifest gen_split(const DatasetConfig& cfg, const std::vector<DigitSprite>& sprites, Split split,
                          int num_sequences, const std::filesystem::path& root);

struct GeneratedDataset {
  DatasetManifest train;
  DatasetManifest test;
};

GeneratedDataset gen_dataset(const DatasetConfig& cfg, const MnistData& mnist, const std::filesystem::path& root,
                             int train_sequences, int test_sequences);

// Raw little-endian float32 tensor I/O.
void write_f32(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace eqscene::datagen
