// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/manip/manip.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "eqscene/core/image_io.hpp"
#include "eqscene/core/rng.hpp"

namespace eqscene::manip {

namespace fs = std::filesystem;

Tensor swap_background(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1) {
  return m.compose_h(x_i1, x_i2, x_i1, x_j1);
}

Tensor retarget_transform(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1) {
  return m.compose_h(x_i1, x_i2, x_j1, x_j1);
}

Tensor full_mix(const SceneModel& m, const Tensor& x_i1, const Tensor& x_i2, const Tensor& x_j1,
                const Tensor& x_k1) {
  return m.compose_h(x_i1, x_i2, x_j1, x_k1);
}

Tensor reconstruct(const SceneModel& m, const Tensor& x1, const Tensor& x2) { return m.compose_h(x1, x2, x1, x1); }

AffineParams latent_transform_for(const AffineParams& gt, int canvas) {
  if (gt.frame != warp::CoordFrame::pixel) throw ContractError("ground-truth motion must be in the pixel frame");
  return warp::pixel_to_normalized(warp::invert(gt), canvas, canvas);
}

Tensor reconstruct_with_gt_transform(const SceneModel& m, const Tensor& x1, std::span<const AffineParams> gt) {
  if (static_cast<int>(gt.size()) != x1.n()) throw ContractError("one ground-truth transform per frame required");
  std::vector<AffineParams> t;
  for (const auto& a : gt) t.push_back(latent_transform_for(a, m.config().image_size));
  return m.compose_h_with(t, x1, x1);
}

// ------------------------------------------------------------------ grid

namespace {

constexpr int kGap = 2;

fs::path sidecar(const fs::path& png, const char* ext) {
  fs::path p = png;
  p.replace_extension(ext);
  return p;
}

}  // namespace

void render_figure_grid(std::span<const FrameRow> rows, const fs::path& png_path) {
  if (rows.empty() || rows.front().empty()) throw ContractError("figure grid needs at least one cell");
  const std::size_t cols = rows.front().size();
  const Shape cell = rows.front().front().shape();
  if (cell.n != 1 || (cell.c != 1 && cell.c != 3)) throw ContractError("figure cells must be single frames");
  for (const auto& r : rows) {
    if (r.size() != cols) throw ContractError("ragged figure grid: rows of " + std::to_string(cols) + " and " + std::to_string(r.size()) + " cells");
    for (const auto& t : r) require_shape(t.shape(), cell, "figure cell");
  }
  Image8 img;
  img.width = static_cast<int>(cols) * (cell.w + kGap) + kGap;
  img.height = static_cast<int>(rows.size()) * (cell.h + kGap) + kGap;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);

  nlohmann::json index{{"rows", rows.size()}, {"cols", cols}, {"cell_shape", {cell.n, cell.c, cell.h, cell.w}},
                       {"dtype", "float32-le"}, {"order", "row-major"}};
  if (png_path.has_parent_path()) fs::create_directories(png_path.parent_path());
  std::ofstream raw(sidecar(png_path, ".cells.f32"), std::ios::binary | std::ios::trunc);
  if (!raw) throw RuntimeError("cannot write figure cells for " + png_path.string());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const Tensor& t = rows[r][c];
      raw.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
      const Image8 tile = to_image8(t);
      const int x0 = kGap + static_cast<int>(c) * (cell.w + kGap);
      const int y0 = kGap + static_cast<int>(r) * (cell.h + kGap);
      for (int y = 0; y < cell.h; ++y) {
        std::copy_n(tile.rgb.data() + static_cast<std::size_t>(y) * cell.w * 3, cell.w * 3,
                    img.rgb.data() + (static_cast<std::size_t>(y0 + y) * img.width + x0) * 3);
      }
    }
  }
  if (!raw) throw RuntimeError("write failed for figure cells of " + png_path.string());
  std::ofstream(sidecar(png_path, ".cells.json")) << index.dump(1) << '\n';
  write_png(png_path, img);
}

std::vector<FrameRow> read_figure_cells(const fs::path& png_path) {
  std::ifstream ji(sidecar(png_path, ".cells.json"));
  if (!ji) throw RuntimeError("no cell index next to " + png_path.string());
  const auto index = nlohmann::json::parse(ji);
  const auto& s = index.at("cell_shape");
  const Shape cell{s[0].get<int>(), s[1].get<int>(), s[2].get<int>(), s[3].get<int>()};
  const auto rows = index.at("rows").get<std::size_t>();
  const auto cols = index.at("cols").get<std::size_t>();
  const auto all = datagen::read_f32(sidecar(png_path, ".cells.f32"), rows * cols * cell.numel());
  std::vector<FrameRow> out(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const auto begin = all.begin() + static_cast<std::ptrdiff_t>((r * cols + c) * cell.numel());
      out[r].emplace_back(cell, std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(cell.numel())));
    }
  return out;
}

// --------------------------------------------------------------- figures

bool FigureFilter::accepts(const datagen::SequenceRecipe& r) const {
  if (r.objects.empty()) return false;
  int rotations = 0, translations = 0, degrees = 0, pixels = 0;
  for (const auto& s : r.objects.front().steps) {
    if (s.kind == datagen::StepKind::rotation) {
      ++rotations;
      degrees += std::abs(s.degrees);
    } else {
      ++translations;
      pixels += std::abs(s.dx) + std::abs(s.dy);
    }
  }
  return rotations >= min_rotations && translations >= min_translations &&
         (degrees >= min_cumulative_degrees || pixels >= min_cumulative_pixels);
}

std::vector<int> select_figure_sequences(const datagen::SequenceSource& data, int count, std::uint64_t seed,
                                         const FigureFilter& filter) {
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derive(seed, {0x666967ULL});
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
  std::vector<int> out;
  std::vector<int> used_backgrounds;
  for (int id : order) {
    if (static_cast<int>(out.size()) == count) break;
    const auto& r = data.recipe(id);
    if (!filter.accepts(r)) continue;
    // Distinct backgrounds keep background swaps visible.
    if (std::find(used_backgrounds.begin(), used_backgrounds.end(), r.background_id) != used_backgrounds.end()) continue;
    used_backgrounds.push_back(r.background_id);
    out.push_back(id);
  }
  if (static_cast<int>(out.size()) < count) {
    throw RuntimeError("only " + std::to_string(out.size()) + " sequences pass the figure filter, " +
                       std::to_string(count) + " needed");
  }
  return out;
}

FigureMode figure_mode_from_string(const std::string& s) {
  if (s == "recon") return FigureMode::recon;
  if (s == "swap-bg") return FigureMode::swap_bg;
  if (s == "retarget") return FigureMode::retarget;
  if (s == "mix") return FigureMode::mix;
  if (s == "gt-transform") return FigureMode::gt_transform;
  throw UsageError("unknown render mode '" + s + "'");
}

std::string to_string(FigureMode m) {
  switch (m) {
    case FigureMode::recon: return "recon";
    case FigureMode::swap_bg: return "swap-bg";
    case FigureMode::retarget: return "retarget";
    case FigureMode::mix: return "mix";
    case FigureMode::gt_transform: return "gt-transform";
  }
  return "?";
}

namespace {

FrameRow split_row(const Tensor& batch) {
  FrameRow row;
  for (int k = 0; k < batch.n(); ++k) row.push_back(slice_batch(batch, k, 1));
  return row;
}

// Frame 0 repeated once per frame of the sequence.
Tensor first_frame_batch(const datagen::VideoSequence& s) {
  Tensor out(s.frames.shape());
  const auto f0 = s.frames.item(0);
  for (int k = 0; k < s.frames.n(); ++k) std::copy(f0.begin(), f0.end(), out.item(k).begin());
  return out;
}

}  // namespace

std::vector<Figure> build_figures(const SceneModel& m, const datagen::SequenceSource& data, FigureMode mode,
                                  std::uint64_t seed) {
  const auto ids = select_figure_sequences(data, 3, seed);
  std::vector<datagen::VideoSequence> seq;
  for (int id : ids) seq.push_back(data.sequence(id));
  const Tensor& a = seq[0].frames;
  const Tensor& b = seq[1].frames;
  const Tensor& c = seq[2].frames;
  const Tensor a1 = first_frame_batch(seq[0]);
  const Tensor b1 = first_frame_batch(seq[1]);
  const Tensor c1 = first_frame_batch(seq[2]);

  std::vector<Figure> figs;
  Figure f{to_string(mode), {}, ids};
  switch (mode) {
    case FigureMode::recon:
      for (const auto& s : seq) {
        f.rows.push_back(split_row(s.frames));
        f.rows.push_back(split_row(reconstruct(m, first_frame_batch(s), s.frames)));
      }
      break;
    case FigureMode::gt_transform:
      for (const auto& s : seq) {
        std::vector<AffineParams> gt;
        for (int k = 0; k < s.num_frames(); ++k) gt.push_back(datagen::ground_truth_affine(s, 0, k));
        f.rows.push_back(split_row(s.frames));
        f.rows.push_back(split_row(reconstruct_with_gt_transform(m, first_frame_batch(s), gt)));
      }
      break;
    case FigureMode::swap_bg:
      f.rows = {split_row(a), split_row(b), split_row(swap_background(m, b1, b, a1)), split_row(c),
                split_row(swap_background(m, c1, c, a1))};
      break;
    case FigureMode::retarget:
      f.rows = {split_row(a), split_row(b), split_row(retarget_transform(m, a1, a, b1)), split_row(c),
                split_row(retarget_transform(m, a1, a, c1))};
      break;
    case FigureMode::mix: {
      f.rows = {split_row(a),
                split_row(b),
                split_row(c),
                split_row(swap_background(m, a1, a, b1)),
                split_row(retarget_transform(m, c1, c, a1)),
                split_row(full_mix(m, c1, c, a1, b1))};
      Figure compact{"mix_compact",
                     {split_row(a), split_row(b), split_row(c), split_row(full_mix(m, b1, b, c1, a1))},
                     ids};
      figs.push_back(std::move(f));
      figs.push_back(std::move(compact));
      return figs;
    }
  }
  figs.push_back(std::move(f));
  return figs;
}

}  // namespace eqscene::manip
