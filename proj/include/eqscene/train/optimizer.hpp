// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "eqscene/nn/layers.hpp"

namespace eqscene::train {

struct AdamWConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::vector<nn::Param*> params, AdamWConfig cfg);

  void step();

  std::int64_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  /// First and second moments, one tensor per parameter (checkpointing).
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

 private:
  std::vector<nn::Param*> params_;
  AdamWConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

}  // namespace eqscene::train
