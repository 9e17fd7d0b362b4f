// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/train/optimizer.hpp"

#include <cmath>

namespace eqscene::train {

AdamW::AdamW(std::vector<nn::Param*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const nn::Param* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const auto lr = static_cast<float>(cfg_.learning_rate);
  const auto b1 = static_cast<float>(cfg_.beta1);
  const auto b2 = static_cast<float>(cfg_.beta2);
  const auto eps = static_cast<float>(cfg_.eps);
  const auto decay = static_cast<float>(cfg_.learning_rate * cfg_.weight_decay);
  const auto inv_bc1 = static_cast<float>(1.0 / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / bc2);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    float* w = params_[k]->value.data();
    const float* g = params_[k]->grad.data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    const std::size_t n = params_[k]->value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.f - b1) * g[i];
      v[i] = b2 * v[i] + (1.f - b2) * g[i] * g[i];
      const float mhat = m[i] * inv_bc1;
      const float vhat = v[i] * inv_bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps) + decay * w[i];
    }
  }
}

}  // namespace eqscene::train
