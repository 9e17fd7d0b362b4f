// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "eqscene/core/image_io.hpp"
#include "eqscene/manip/manip.hpp"
#include "eqscene/warp/warp.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace eqscene;
using namespace eqscene::manip;
using eqscene::model::ModelConfig;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.image_size = 16;
  c.latent_size = 8;
  c.latent_channels = 4;
  c.stem_channels = 4;
  c.residual_blocks = 1;
  c.hidden_size = 8;
  c.seed = 6;
  return c;
}

Tensor random_frames(Rng& rng, Shape s) {
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(0, 1));
  return t;
}

void check_unit_range(const Tensor& t) {
  for (float v : t.values()) REQUIRE((v >= 0.f && v <= 1.f));
}

std::vector<datagen::DigitSprite> blob_sprites(int n) {
  Rng rng(5);
  std::vector<datagen::DigitSprite> out(static_cast<std::size_t>(n));
  for (auto& s : out)
    for (int y = 6; y < 22; ++y)
      for (int x = 9; x < 19; ++x) s.intensity[y * 28 + x] = static_cast<float>(rng.uniform(0.4, 1.0));
  return out;
}

}  // namespace

TEST_SUITE("manip") {
  TEST_CASE("manipulations are h-compositions") {
    SceneModel m(tiny_config());
    gradcheck::randomize_transform_output(m, 7);
    Rng rng(71);
    const Shape s = m.frame_shape(3);
    const Tensor i1 = random_frames(rng, s), i2 = random_frames(rng, s);
    const Tensor j1 = random_frames(rng, s), k1 = random_frames(rng, s);
    CHECK(swap_background(m, i1, i2, j1) == m.compose_h(i1, i2, i1, j1));
    CHECK(retarget_transform(m, i1, i2, j1) == m.compose_h(i1, i2, j1, j1));
    CHECK(full_mix(m, i1, i2, j1, k1) == m.compose_h(i1, i2, j1, k1));
    CHECK(reconstruct(m, i1, i2) == m.compose_h(i1, i2, i1, i1));

    CHECK(swap_background(m, i1, i2, i1) == m.forward_pair(i1, i2).x2_hat);
    CHECK(retarget_transform(m, i1, i2, i1) == m.forward_pair(i1, i2).x2_hat);
    CHECK(full_mix(m, i1, i2, i1, k1) == swap_background(m, i1, i2, k1));
    CHECK(full_mix(m, i1, i2, j1, j1) == retarget_transform(m, i1, i2, j1));
    check_unit_range(full_mix(m, i1, i2, j1, k1));
    check_unit_range(swap_background(m, i1, i2, j1));
    check_unit_range(retarget_transform(m, i1, i2, j1));
    CHECK(full_mix(m, i1, i2, j1, k1) == full_mix(m, i1, i2, j1, k1));
  }

  TEST_CASE("latent transform for a known motion") {
    const auto t = latent_transform_for(warp::make_translation(8, 0), 64);
    CHECK(t.frame == warp::CoordFrame::normalized);
    CHECK(t.tx == doctest::Approx(-0.25));
    // Content moves in the direction of the motion.
    Tensor map(Shape{1, 1, 16, 16});
    map(0, 0, 5, 4) = 1.f;
    const Tensor out = warp::affine_warp(map, latent_transform_for(warp::make_translation(3, 2), 16));
    CHECK(out(0, 0, 7, 7) == doctest::Approx(1.0));
    CHECK_THROWS_AS(latent_transform_for(AffineParams::identity(warp::CoordFrame::normalized), 64), ContractError);
  }

  TEST_CASE("reconstruction with a supplied transform") {
    SceneModel m(tiny_config());
    gradcheck::randomize_transform_output(m, 8);
    Rng rng(72);
    const Tensor x = random_frames(rng, m.frame_shape(2));
    const std::vector<AffineParams> id(2, AffineParams::identity());
    const Tensor plain =
        m.render(SceneModel::compose_scene(m.encode_object(x), m.encode_background(x)));
    const Tensor got = reconstruct_with_gt_transform(m, x, id);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - plain[i]) < 1e-5);

    const std::vector<AffineParams> gt{warp::make_rotation(-9, {7.5, 7.5}), warp::make_translation(2, -4)};
    const std::vector<AffineParams> stub{latent_transform_for(gt[0], 16), latent_transform_for(gt[1], 16)};
    const Tensor with_gt = reconstruct_with_gt_transform(m, x, gt);
    CHECK(with_gt == m.compose_h_with(stub, x, x));
    check_unit_range(with_gt);
    CHECK_THROWS_AS(reconstruct_with_gt_transform(m, x, std::span<const AffineParams>(gt.data(), 1)), ContractError);
  }

  TEST_CASE("figure grid") {
    const auto dir = oracle::temp_dir("grid");
    Rng rng(73);
    SUBCASE("single cell") {
      const std::vector<FrameRow> rows{{random_frames(rng, {1, 3, 64, 64})}};
      render_figure_grid(rows, dir / "one.png");
      const Image8 img = read_png(dir / "one.png");
      CHECK(img.width == 68);
      CHECK(img.height == 68);
      for (int k : {0, 1, 66, 67}) {
        CHECK(img.rgb[static_cast<std::size_t>(k) * 3] == 255);
        CHECK(img.rgb[(static_cast<std::size_t>(k) * 68) * 3 + 1] == 255);
      }
      const Image8 cell = to_image8(rows[0][0]);
      CHECK(img.rgb[(2 * 68 + 2) * 3] == cell.rgb[0]);
    }
    SUBCASE("six rows of five") {
      std::vector<FrameRow> rows(6);
      for (auto& r : rows)
        for (int c = 0; c < 5; ++c) r.push_back(random_frames(rng, {1, 3, 64, 64}));
      render_figure_grid(rows, dir / "grid.png");
      const Image8 img = read_png(dir / "grid.png");
      CHECK(img.width == 5 * 64 + 6 * 2);
      CHECK(img.height == 6 * 64 + 7 * 2);
      const auto back = read_figure_cells(dir / "grid.png");
      REQUIRE(back.size() == 6);
      for (std::size_t r = 0; r < 6; ++r) {
        REQUIRE(back[r].size() == 5);
        for (std::size_t c = 0; c < 5; ++c) CHECK(back[r][c] == rows[r][c]);
      }
    }
    SUBCASE("bad input") {
      CHECK_THROWS(render_figure_grid(std::vector<FrameRow>{}, dir / "empty.png"));
      const std::vector<FrameRow> ragged{{random_frames(rng, {1, 3, 64, 64}), random_frames(rng, {1, 3, 64, 64})},
                                         {random_frames(rng, {1, 3, 64, 64})}};
      CHECK_THROWS(render_figure_grid(ragged, dir / "ragged.png"));
    }
  }

  TEST_CASE("figure filter") {
    using datagen::StepKind;
    datagen::SequenceRecipe r;
    r.objects.resize(1);
    auto step = [](StepKind k, int deg, int dx, int dy) { return datagen::TrajectoryStep{k, deg, dx, dy}; };
    r.objects[0].steps = {step(StepKind::rotation, 15, 0, 0), step(StepKind::rotation, -12, 0, 0),
                          step(StepKind::translation, 0, 2, 2), step(StepKind::translation, 0, -2, 2)};
    CHECK(FigureFilter{}.accepts(r));
    r.objects[0].steps[1] = step(StepKind::rotation, 3, 0, 0);
    CHECK(!FigureFilter{}.accepts(r));
    r.objects[0].steps[2] = step(StepKind::translation, 0, 10, 10);
    CHECK(FigureFilter{}.accepts(r));
    r.objects[0].steps[0] = step(StepKind::translation, 0, 4, 4);
    CHECK(!FigureFilter{}.accepts(r));
  }

  TEST_CASE("figures from a dataset") {
    const datagen::ProceduralDataset data(datagen::DatasetConfig{}, datagen::Split::test, blob_sprites(6), 120);
    const auto ids = select_figure_sequences(data, 3, 4);
    CHECK(ids == select_figure_sequences(data, 3, 4));
    std::set<int> bgs;
    for (int id : ids) {
      CHECK(FigureFilter{}.accepts(data.recipe(id)));
      bgs.insert(data.recipe(id).background_id);
    }
    CHECK(bgs.size() == 3);
    CHECK_THROWS_AS(select_figure_sequences(data, 500, 4), RuntimeError);

    SceneModel m(ModelConfig::desk_cpu());
    const auto recon = build_figures(m, data, FigureMode::recon, 4);
    REQUIRE(recon.size() == 1);
    CHECK(recon[0].rows.size() == 6);
    CHECK(recon[0].rows[0].size() == 5);
    CHECK(recon[0].rows[0][2] == data.sequence(ids[0]).frame(2));
    CHECK(build_figures(m, data, FigureMode::swap_bg, 4)[0].rows.size() == 5);
    CHECK(build_figures(m, data, FigureMode::retarget, 4)[0].rows.size() == 5);
    CHECK(build_figures(m, data, FigureMode::gt_transform, 4)[0].rows.size() == 6);
    const auto mix = build_figures(m, data, FigureMode::mix, 4);
    REQUIRE(mix.size() == 2);
    CHECK(mix[0].rows.size() == 6);
    CHECK(mix[1].name == "mix_compact");
    CHECK(mix[1].rows.size() == 4);
    CHECK(figure_mode_from_string(to_string(FigureMode::gt_transform)) == FigureMode::gt_transform);
    CHECK_THROWS(figure_mode_from_string("nope"));
  }
}
