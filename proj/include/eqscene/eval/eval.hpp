// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eqscene/datagen/generator.hpp"
#include "eqscene/model/scene_model.hpp"

namespace eqscene::eval {

double mse(const Tensor& a, const Tensor& b);
/// -10 log10(mse) for peak 1; +infinity when the frames are identical.
double psnr(const Tensor& a, const Tensor& b);
double psnr_from_mse(double mse);

/// Two sequences with distinct digit and background, indexed at the same (i, j).
struct EvalPair {
  datagen::VideoSequence seq1;
  datagen::VideoSequence seq2;
  datagen::FramePair indices;
  Tensor background_target;  // object of seq1 frame j over the background of seq2
  Tensor transform_target;   // seq2 frame i with seq2's object replayed through seq1's steps i -> j
  Tensor background2;        // seq2 background alone
  int attempts = 1;          // draws needed to get a valid replay
};

/// Pose reached by replaying `steps` from frame i to frame j (backwards when j < i).
datagen::Pose replay_steps(const datagen::Pose& start, std::span<const datagen::TrajectoryStep> steps, int i, int j);

EvalPair make_eval_pair(Rng& rng, const datagen::DatasetConfig& cfg, std::span<const datagen::BackgroundSpec> backgrounds,
                        std::span<const datagen::DigitSprite> digits);

/// Pair k of an evaluation set comes from the stream (seed, k).
std::vector<EvalPair> make_eval_set(int n, std::uint64_t seed, const datagen::DatasetConfig& cfg,
                                    std::span<const datagen::BackgroundSpec> backgrounds,
                                    std::span<const datagen::DigitSprite> digits);

struct MetricSummary {
  std::string name;
  std::vector<double> mse;
  std::vector<double> psnr;  // may contain +infinity
  double mean_mse = 0.0;
  double ci_mse = 0.0;
  double mean_psnr = 0.0;  // over finite values only
  double ci_psnr = 0.0;
  int count = 0;
  int infinite_psnr = 0;
};

struct MeanCI {
  double mean = 0.0;
  double half_width = 0.0;
  int n = 0;
};

/// Mean and 1.96 * sample sd / sqrt(n), summed in index order.
MeanCI mean_ci(std::span<const double> v);
MetricSummary summarize(std::string name, std::vector<double> mse_values);

MetricSummary eval_background_manip(const model::SceneModel& m, std::span<const EvalPair> pairs, int batch = 64);
MetricSummary eval_transform_manip(const model::SceneModel& m, std::span<const EvalPair> pairs, int batch = 64);
MetricSummary baseline_video_frames(std::span<const EvalPair> pairs);
MetricSummary baseline_no_object(std::span<const EvalPair> pairs);

/// Per-entry statistics of 2x3 affine coefficients (a11 a12 tx a21 a22 ty).
struct TransformStats {
  std::array<double, 6> mean{};
  std::array<double, 6> max{};
  std::array<double, 6> min{};
  std::array<double, 6> max_abs{};
  int count = 0;
  warp::CoordFrame frame = warp::CoordFrame::pixel;
  /// Ground truth only: movement of the digit center (A c - c), which does not
  /// depend on where the canvas origin sits.
  bool has_displacement = false;
  std::array<double, 2> displacement_mean{};
  std::array<double, 2> displacement_max_abs{};

  nlohmann::json to_json() const;
};

TransformStats accumulate_stats(std::span<const warp::AffineParams> transforms);

enum class TransformSource { ground_truth, learned };
TransformSource transform_source_from_string(const std::string& s);

/// Pair k: sequence k of a fresh split planned from cfg, frames drawn from (seed, k).
/// The learned source needs a model and reports normalized-frame coefficients.
TransformStats analyze_transform_stats(TransformSource source, const model::SceneModel* m, int n_pairs,
                                       std::uint64_t seed, const datagen::DatasetConfig& cfg,
                                       std::span<const datagen::DigitSprite> digits,
                                       datagen::Split split = datagen::Split::train);

struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;   // smallest value >= q1 - 1.5 IQR
  double whisker_high = 0.0;  // largest value <= q3 + 1.5 IQR
  int outliers = 0;
};

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q);
BoxStats box_stats(std::span<const double> v);

/// stats.json, mse_boxplot.svg and psnr_table.md in out_dir.
void emit_report(std::span<const MetricSummary> summaries, const std::filesystem::path& out_dir);

}  // namespace eqscene::eval
