// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Moving digits on static diamond backgrounds.
//
// Angles in this module follow the on-screen convention: positive degrees turn
// counterclockwise as seen with a bottom-left origin. Canvas coordinates are
// the pixel frame of warp::AffineParams (y down), so screen_rotation() is the
// single place where the sign flips.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqscene/core/rng.hpp"
#include "eqscene/core/tensor.hpp"
#include "eqscene/datagen/mnist.hpp"
#include "eqscene/warp/affine.hpp"
#include "json.hpp"

namespace eqscene::datagen {

using warp::AffineParams;

struct Rgb {
  float r = 0.f, g = 0.f, b = 0.f;
  bool operator==(const Rgb&) const = default;
};

struct Diamond {
  int cx = 0;
  int cy = 0;
  int radius = 0;
  Rgb color;
  int color_index = 0;

  /// L1-ball membership.
  bool contains(int px, int py) const { return std::abs(px - cx) + std::abs(py - cy) <= radius; }
};

struct BackgroundSpec {
  int id = 0;
  Split split = Split::train;
  Rgb base;
  int base_index = 0;
  std::array<Diamond, 5> diamonds{};
  Tensor rendered;  // (1, 3, canvas, canvas)
};

struct DatasetConfig {
  int frames = 5;  // M
  int digits_per_video = 1;  // N
  int canvas = 64;
  int digit_size = kDigitSize;
  int backgrounds_per_split = 64;
  std::vector<int> rotation_set{-15, -12, -9, -6, -3, 3, 6, 9, 12, 15};
  std::vector<int> translation_set{-10, -8, -6, -4, -2, 2, 4, 6, 8, 10};
  double rotation_probability = 0.5;
  std::uint64_t seed = 0;
  int max_redo = 100;
  float alpha_min = 1.0f / 255.0f;

  void validate() const;
  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

enum class StepKind { rotation, translation };

struct TrajectoryStep {
  StepKind kind = StepKind::translation;
  int degrees = 0;
  int dx = 0;
  int dy = 0;

  bool operator==(const TrajectoryStep&) const = default;
};

/// Placement of one digit: canvas position of the sprite center plus the
/// cumulative on-screen rotation in degrees.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double angle = 0.0;

  bool operator==(const Pose&) const = default;
};

struct ObjectTrack {
  int digit_index = 0;  // into the split's sprite list
  int label = 0;
  std::vector<Pose> poses;  // one per frame
  std::vector<TrajectoryStep> steps;  // frames - 1
};

/// Everything needed to re-render a sequence bit-exactly.
struct SequenceRecipe {
  int id = 0;
  Split split = Split::train;
  std::uint64_t seed = 0;
  int background_id = 0;
  std::vector<ObjectTrack> objects;
};

struct VideoSequence {
  SequenceRecipe recipe;
  Tensor frames;  // (M, 3, canvas, canvas)
  Tensor alpha;  // (M, 1, canvas, canvas), combined object coverage

  int num_frames() const { return frames.n(); }
  Tensor frame(int k) const { return slice_batch(frames, k, 1); }
};

Rgb color_rgb(int index);

/// Rotation by on-screen counterclockwise degrees about `center` (pixel frame).
AffineParams screen_rotation(double degrees, warp::Point center);

/// Sprite pixel coordinates -> canvas pixel coordinates.
AffineParams placement(const Pose& pose, int digit_size = kDigitSize);

/// Pose after one step; rotations turn about the current digit center.
Pose advance(const Pose& pose, const TrajectoryStep& step);
/// Pose before one step (exact inverse of advance).
Pose retreat(const Pose& pose, const TrajectoryStep& step);

/// Canvas-space map of one step taken from `before`.
AffineParams step_affine(const Pose& before, const TrajectoryStep& step);

BackgroundSpec gen_background(Rng& rng, int id, Split split, int canvas = 64);
Tensor render_background(const Rgb& base, std::span<const Diamond> diamonds, int canvas);
/// The backgrounds_per_split pool of a split, from stream (seed, "backgrounds", split).
std::vector<BackgroundSpec> gen_background_pool(const DatasetConfig& cfg, Split split);

TrajectoryStep sample_step(Rng& rng, const DatasetConfig& cfg);

/// Digit alpha on the canvas: transformed sprite intensity, bilinear, zero outside.
Tensor render_alpha(const DigitSprite& sprite, const Pose& pose, int canvas);

/// True when every pixel with alpha > alpha_min lands inside the canvas.
bool fits_canvas(const DigitSprite& sprite, const Pose& pose, int canvas, float alpha_min);

struct RenderedFrame {
  Tensor frame;  // (1, 3, canvas, canvas)
  Tensor alpha;  // (1, 1, canvas, canvas)
};

/// White digits composited over the background: out = a + (1 - a) * bg, in order.
RenderedFrame render_frame(std::span<const DigitSprite* const> sprites, std::span<const Pose> poses,
                           const BackgroundSpec& background);
RenderedFrame render_frame(const DigitSprite& sprite, const Pose& pose, const BackgroundSpec& background);

/// Samples initial pose and M-1 steps for one digit, resampling any step that
/// would push the digit off the canvas. Throws RuntimeError after max_redo
/// consecutive rejections.
ObjectTrack plan_track(const DigitSprite& sprite, int digit_index, Rng& rng, const DatasetConfig& cfg,
                       std::uint64_t seed_for_errors);

/// Renders all frames of a planned sequence.
VideoSequence render_sequence(const SequenceRecipe& recipe, std::span<const DigitSprite> sprites,
                              std::span<const BackgroundSpec> backgrounds, const DatasetConfig& cfg);

/// One digit, one background: plan a trajectory and render it.
VideoSequence simulate_trajectory(const DigitSprite& sprite, const BackgroundSpec& background, Rng& rng,
                                  const DatasetConfig& cfg);

/// Sequence `id` of a split: background, digits and trajectory drawn from the
/// stream (cfg.seed, split, id). Independent of every other sequence.
SequenceRecipe plan_sequence(int id, Split split, std::span<const DigitSprite> sprites, const DatasetConfig& cfg);

/// Map sending object `object`'s placement in frame i to its placement in frame j.
AffineParams ground_truth_affine(const SequenceRecipe& seq, int i, int j, int object = 0);
inline AffineParams ground_truth_affine(const VideoSequence& seq, int i, int j, int object = 0) {
  return ground_truth_affine(seq.recipe, i, j, object);
}

struct FramePair {
  int i = 0;
  int j = 0;
};

/// Ordered indices drawn uniformly without replacement from [0, frames).
FramePair sample_frame_indices(Rng& rng, int frames);

struct TrainingPair {
  Tensor x1;
  Tensor x2;
  FramePair indices;
};

TrainingPair sample_training_pair(const VideoSequence& seq, Rng& rng);

nlohmann::json to_json(const TrajectoryStep& s);
TrajectoryStep step_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SequenceRecipe& r);
SequenceRecipe recipe_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BackgroundSpec& b);

}  // namespace eqscene::datagen
