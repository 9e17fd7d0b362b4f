// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/model/config.hpp"

#include <cstdio>

#include "eqscene/core/error.hpp"
#include "eqscene/nn/layers.hpp"

namespace eqscene::model {

ModelConfig ModelConfig::desk_cpu() {
  ModelConfig c;
  c.latent_channels = 32;
  c.stem_channels = 16;
  c.residual_blocks = 1;
  return c;
}

int ModelConfig::downsampling_stages() const {
  int stages = 0;
  int s = image_size;
  while (s > latent_size && s % 2 == 0) {
    s /= 2;
    ++stages;
  }
  return s == latent_size ? stages : -1;
}

void ModelConfig::validate() const {
  if (image_size <= 0 || latent_size <= 0 || latent_channels <= 0 || stem_channels <= 0 ||
      image_channels <= 0 || hidden_size <= 0 || embed_channels <= 0 || embed_pool <= 0 ||
      residual_blocks < 0) {
    throw ContractError("model config: sizes must be positive");
  }
  if (downsampling_stages() < 1) {
    throw ContractError("model config: image_size / latent_size must be a power of two >= 2");
  }
  if (latent_size % embed_pool != 0) throw ContractError("model config: embed_pool must divide latent_size");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"image_size", image_size},         {"image_channels", image_channels},
          {"latent_channels", latent_channels}, {"latent_size", latent_size},
          {"stem_channels", stem_channels},   {"residual_blocks", residual_blocks},
          {"embed_channels", embed_channels}, {"embed_pool", embed_pool},
          {"hidden_size", hidden_size},       {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.image_channels = j.value("image_channels", c.image_channels);
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.latent_size = j.value("latent_size", c.latent_size);
  c.stem_channels = j.value("stem_channels", c.stem_channels);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.embed_channels = j.value("embed_channels", c.embed_channels);
  c.embed_pool = j.value("embed_pool", c.embed_pool);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::string json_digest(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(nn::fnv1a(j.dump())));
  return buf;
}

std::string ModelConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("seed");
  return json_digest(j);
}

}  // namespace eqscene::model
