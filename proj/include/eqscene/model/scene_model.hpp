// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "eqscene/core/tensor.hpp"
#include "eqscene/model/config.hpp"
#include "eqscene/nn/layers.hpp"
#include "eqscene/warp/affine.hpp"

namespace eqscene::model {

using warp::AffineParams;

/// T^Z: maps an ordered pair of object codes to a normalized-frame affine.
///
/// Each code is embedded by a shared 1x1 projection, ReLU and average pool;
/// the two embeddings are concatenated (first code first) and regressed to six
/// coefficients. The output layer starts with zero weights and an identity
/// bias, so a fresh network predicts the identity for every input.
class TransformNet {
 public:
  TransformNet(const ModelConfig& cfg);

  /// Returns (B, 6, 1, 1) coefficients in row-major theta layout.
  Tensor forward(const Tensor& z1, const Tensor& z2, nn::Tape* tape) const;
  /// Returns gradients for (z1, z2).
  std::pair<Tensor, Tensor> backward(const Tensor& dtheta, nn::Tape& tape);
  void collect(std::vector<nn::Param*>& out);

  nn::Linear& output_layer() { return *out_; }

 private:
  nn::Sequential embed_;
  nn::Sequential mlp_;
  nn::Linear* out_ = nullptr;
};

/// Everything forward_pair computes, kept for the losses.
struct PairOutputs {
  Tensor x2_hat;
  Tensor theta;  // (B, 6, 1, 1)
  Tensor z_o1, z_o2, z_b1, z_b2;
  Tensor z_o1_warped;

  std::vector<AffineParams> transforms() const;
};

/// The four learned functions: object encoder f_o, background encoder f_b,
/// renderer g, and transform network T^Z.
class SceneModel {
 public:
  explicit SceneModel(ModelConfig cfg);

  SceneModel(const SceneModel&) = delete;
  SceneModel& operator=(const SceneModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Shape frame_shape(int batch) const { return {batch, cfg_.image_channels, cfg_.image_size, cfg_.image_size}; }
  Shape code_shape(int batch) const { return {batch, cfg_.latent_channels, cfg_.latent_size, cfg_.latent_size}; }

  Tensor encode_object(const Tensor& frames) const;
  Tensor encode_background(const Tensor& frames) const;

  /// One transform per batch item, input-order dependent.
  std::vector<AffineParams> predict_transform(const Tensor& z1, const Tensor& z2) const;
  Tensor predict_theta(const Tensor& z1, const Tensor& z2) const;

  /// Warps each code item with its own transform on the latent grid.
  static Tensor apply_transform(std::span<const AffineParams> transforms, const Tensor& z);
  static Tensor compose_scene(const Tensor& z_obj, const Tensor& z_bg);

  Tensor render(const Tensor& scene) const;

  PairOutputs forward_pair(const Tensor& x1, const Tensor& x2) const;

  /// g(T^Z(f_o(x1), f_o(x2)) o f_o(x3) + f_b(x4)).
  Tensor compose_h(const Tensor& x1, const Tensor& x2, const Tensor& x3, const Tensor& x4) const;
  /// compose_h with the transform supplied instead of predicted.
  Tensor compose_h_with(std::span<const AffineParams> transforms, const Tensor& x3, const Tensor& x4) const;

  nn::Sequential& object_encoder() { return f_o_; }
  nn::Sequential& background_encoder() { return f_b_; }
  nn::Sequential& renderer() { return g_; }
  TransformNet& transform_net() { return t_z_; }

  /// All parameters in a fixed order: f_o, f_b, g, T^Z.
  std::vector<nn::Param*> parameters();
  std::vector<const nn::Param*> parameters() const;

  struct ParamGroups {
    std::vector<nn::Param*> object_encoder, background_encoder, renderer, transform;
  };
  ParamGroups parameter_groups();

  /// Re-initializes all parameters from cfg.seed.
  void reset_parameters();

 private:
  void check_frames(const Tensor& x, const char* who) const;
  void check_code(const Tensor& z, const char* who) const;

  ModelConfig cfg_;
  nn::Sequential f_o_;
  nn::Sequential f_b_;
  nn::Sequential g_;
  TransformNet t_z_;
};

/// Coefficients (B, 6, 1, 1) to normalized-frame maps and back.
std::vector<AffineParams> theta_to_affines(const Tensor& theta);
Tensor affines_to_theta(std::span<const AffineParams> transforms);

}  // namespace eqscene::model
