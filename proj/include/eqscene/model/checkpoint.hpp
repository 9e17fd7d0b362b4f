// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint file layout:
//
//   8 bytes   magic "EQSCKPT\0"
//   8 bytes   header length L (uint64 little-endian)
//   L bytes   JSON header
//   float32 little-endian payload: parameters in model order, then any
//             auxiliary tensors (optimizer moments), shapes listed in the header

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eqscene/model/scene_model.hpp"

namespace eqscene::model {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string config_hash;  // ModelConfig::hash of the stored architecture
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  ModelConfig model;
  nlohmann::json extra = nlohmann::json::object();  // caller-owned metadata
  std::vector<std::string> param_names;
  std::vector<Tensor> params;
  std::vector<Tensor> aux;
};

void save_checkpoint(const std::filesystem::path& path, const SceneModel& model, std::int64_t step,
                     std::uint64_t seed, const nlohmann::json& extra = nlohmann::json::object(),
                     std::span<const Tensor> aux = {});

/// Throws DataFormatError on bad magic, truncation or an inconsistent header.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies parameters into `model`; names, shapes and the config hash must match.
void load_parameters(SceneModel& model, const Checkpoint& ckpt);

/// Builds a model with the stored architecture and parameters.
std::unique_ptr<SceneModel> load_model(const std::filesystem::path& path);

}  // namespace eqscene::model
