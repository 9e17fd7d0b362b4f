// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Scene manipulations built from h(x1, x2, x3, x4) = g(T^Z(f_o(x1), f_o(x2)) o f_o(x3) + f_b(x4)).
// All frames are batches (B, 3, H, W); item b of every argument belongs together.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eqscene/datagen/dataset.hpp"
#include "eqscene/model/scene_model.hpp"

namespace eqscene::manip {

using model::SceneModel;
using warp::AffineParams;

/// The object of x_i1, moved as from x_i1 to x_i2, over the background of x_j1.
Tensor swap_background(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1);
/// The scene x_j1 with the object moved as from x_i1 to x_i2.
Tensor retarget_transform(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1);
/// The object of x_j1 over the background of x_k1, moved as from x_i1 to x_i2.
Tensor full_mix(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1,
                const Tensor& x_k1);
/// Plain reconstruction of x2 from the pair (x1, x2).
Tensor reconstruct(const SceneModel& m, const Tensor& x1, const Tensor& x2);

/// Renders x1 with its object code warped by a known canvas-space motion
/// (pixel frame, mapping the object's placement in x1 to its new placement).
/// The warp samples backwards, so the latent is warped by the normalized inverse.
Tensor reconstruct_with_gt_transform(const SceneModel& m, const Tensor& x1, std::span<const AffineParams> gt);
/// Sampling map in normalized coordinates that moves content by the pixel-frame motion `gt`.
AffineParams latent_transform_for(const AffineParams& gt, int canvas);

using FrameRow = std::vector<Tensor>;  // each (1, C, H, W)

/// Tiles rows into one PNG with 2 px white separators and a 2 px border.
/// Alongside it writes <stem>.cells.json and <stem>.cells.f32 with every cell's raw floats.
void render_figure_grid(std::span<const FrameRow> rows, const std::filesystem::path& png_path);

/// Reads the raw cells written next to a grid PNG.
std::vector<FrameRow> read_figure_cells(const std::filesystem::path& png_path);

struct FigureFilter {
  int min_rotations = 2;
  int min_translations = 2;
  int min_cumulative_degrees = 24;
  int min_cumulative_pixels = 16;

  bool accepts(const datagen::SequenceRecipe& r) const;
};

/// `count` distinct sequence ids passing the filter, visited in a seeded order.
std::vector<int> select_figure_sequences(const datagen::SequenceSource& data, int count, std::uint64_t seed,
                                         const FigureFilter& filter = {});

enum class FigureMode { recon, swap_bg, retarget, mix, gt_transform };
FigureMode figure_mode_from_string(const std::string& s);
std::string to_string(FigureMode m);

struct Figure {
  std::string name;
  std::vector<FrameRow> rows;
  std::vector<int> sequence_ids;
};

/// Row layouts:
///   recon         three (original, reconstruction) row pairs
///   gt_transform  three (original, reconstruction with the true motion) row pairs
///   swap_bg       originals A, B, B on A's background, C, C on A's background
///   retarget      originals A, B, B moved like A, C, C moved like A
///   mix           two templates: "mix" (A, B, C, A on B's background, A moved like C, both)
///                 and "mix_compact" (A, B, C, C's object moved like B on A's background)
std::vector<Figure> build_figures(const SceneModel& m, const datagen::SequenceSource& data, FigureMode mode,
                                  std::uint64_t seed);

}  // namespace eqscene::manip
