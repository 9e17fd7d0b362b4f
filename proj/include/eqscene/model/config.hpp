// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace eqscene::model {

/// Architecture of the scene model. Both encoders share this layout; the
/// renderer mirrors it without skip connections.
struct ModelConfig {
  int image_size = 64;
  int image_channels = 3;
  int latent_channels = 64;
  int latent_size = 16;
  int stem_channels = 32;
  int residual_blocks = 3;
  /// Transform head: a 1x1 projection to `embed_channels`, average-pooled by
  /// `embed_pool`, gives an embedding of embed_channels * (latent_size / embed_pool)^2.
  int embed_channels = 2;
  int embed_pool = 2;
  int hidden_size = 128;
  std::uint64_t seed = 0;

  /// Reduced profile for single-core CPU training runs.
  static ModelConfig desk_cpu();

  int embed_size() const {
    const int side = latent_size / embed_pool;
    return embed_channels * side * side;
  }
  int downsampling_stages() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// Hex digest of the architecture fields (seed excluded).
  std::string hash() const;
};

/// 16-hex-digit FNV-1a digest of a JSON document's canonical dump.
std::string json_digest(const nlohmann::json& j);

}  // namespace eqscene::model
