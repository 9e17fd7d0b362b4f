// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eqscene/datagen/dataset.hpp"
#include "eqscene/model/scene_model.hpp"
#include "eqscene/train/losses.hpp"
#include "eqscene/train/optimizer.hpp"

namespace eqscene::train {

struct TrainingConfig {
  LossWeights weights;
  int batch_size = 32;
  std::int64_t steps = 0;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 1000;  // 0 disables intermediate checkpoints
  std::string data_path;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
  /// Digest of everything that shapes the loss trajectory. `steps`,
  /// `checkpoint_every` and `data_path` are excluded so a run can be extended.
  std::string hash() const;
};

struct Batch {
  Tensor x1;  // (B, 3, H, W)
  Tensor x2;
  std::vector<int> sequence_ids;
  std::vector<datagen::FramePair> indices;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

/// Item b of step `step` comes from the stream (seed, step, b): a uniformly
/// chosen sequence and an ordered frame pair within it.
Batch sample_batch(const datagen::SequenceSource& data, int batch_size, std::uint64_t seed, std::int64_t step);

/// Thrown when a loss term is NaN or infinite.
class NonFiniteLossError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Raised when a checkpoint was produced under a different configuration.
class ResumeMismatchError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

/// Losses and parameter gradients for one batch, without an update.
/// Gradients are accumulated into Param::grad (callers zero them).
LossBreakdown forward_backward(model::SceneModel& model, const Batch& batch, const LossWeights& weights);

/// One AdamW update on L_total.
LossBreakdown train_step(model::SceneModel& model, AdamW& opt, const Batch& batch, const TrainingConfig& cfg);

struct TrainResult {
  std::int64_t start_step = 0;
  std::int64_t final_step = 0;
  std::filesystem::path final_checkpoint;
  std::vector<LossBreakdown> losses;  // steps run in this call
};

struct TrainLoopOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::function<void(std::int64_t, const LossBreakdown&)> on_step;
};

/// Runs steps [start, cfg.steps). Writes metrics.jsonl (one record per step)
/// and checkpoints under out_dir/checkpoints; final.ckpt holds the last state.
TrainResult train_loop(model::SceneModel& model, const datagen::SequenceSource& data, const TrainingConfig& cfg,
                       const TrainLoopOptions& opts);

/// Value stored in checkpoint "extra" for resume checks.
std::string run_fingerprint(const model::SceneModel& model, const datagen::SequenceSource& data,
                            const TrainingConfig& cfg);

}  // namespace eqscene::train
