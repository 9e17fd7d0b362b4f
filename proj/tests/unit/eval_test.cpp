// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "eqscene/eval/eval.hpp"
#include "support/oracles.hpp"

using namespace eqscene;
using namespace eqscene::eval;
using datagen::DatasetConfig;
using datagen::Split;
namespace fs = std::filesystem;

namespace {

Tensor filled(float v) {
  Tensor t(Shape{1, 3, 8, 8});
  t.fill(v);
  return t;
}

std::vector<datagen::DigitSprite> blob_sprites(int n, float level = 1.f) {
  Rng rng(8);
  std::vector<datagen::DigitSprite> out(static_cast<std::size_t>(n));
  for (auto& s : out)
    for (int y = 7; y < 21; ++y)
      for (int x = 10; x < 18; ++x) s.intensity[y * 28 + x] = level * static_cast<float>(rng.uniform(0.5, 1.0));
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("mse and psnr") {
    const Tensor a = filled(0.f);
    const Tensor b = filled(0.5f);
    CHECK(mse(a, a) == 0.0);
    CHECK(mse(a, b) == 0.25);
    CHECK(mse(b, a) == mse(a, b));
    CHECK(psnr_from_mse(0.25) == doctest::Approx(6.0206).epsilon(1e-5));
    CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  }

  TEST_CASE("quantiles and box statistics") {
    const std::vector<double> v{5, 1, 4, 2, 3};
    CHECK(quantile(v, 0.25) == 2.0);
    CHECK(quantile(v, 0.5) == 3.0);
    CHECK(quantile(v, 0.75) == 4.0);
    const auto b = box_stats(v);
    CHECK(b.q1 == 2.0);
    CHECK(b.median == 3.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.whisker_low == 1.0);
    CHECK(b.whisker_high == 5.0);
    CHECK(b.outliers == 0);
    const std::vector<double> w{1, 2, 3, 4, 100};
    CHECK(box_stats(w).outliers == 1);
    CHECK(box_stats(w).whisker_high == 4.0);
    CHECK(quantile({1, 2}, 0.5) == 1.5);
  }

  TEST_CASE("mean and confidence interval") {
    const std::vector<double> v{1, 2, 3, 4};
    const auto ci = mean_ci(v);
    CHECK(ci.mean == 2.5);
    CHECK(ci.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
    const auto s = summarize("x", {0.01, 0.0, 0.0001});
    CHECK(s.count == 3);
    CHECK(s.infinite_psnr == 1);
    CHECK(s.mean_psnr == doctest::Approx(30.0));
  }

  TEST_CASE("replaying steps") {
    using datagen::StepKind;
    const datagen::Pose start{30, 31, 0};
    const std::vector<datagen::TrajectoryStep> steps{{StepKind::translation, 0, 2, -4},
                                                     {StepKind::rotation, 9, 0, 0},
                                                     {StepKind::translation, 0, -6, 8}};
    const auto fwd = replay_steps(start, steps, 0, 3);
    CHECK(fwd.x == 26);
    CHECK(fwd.y == 35);
    CHECK(fwd.angle == 9);
    const auto back = replay_steps(fwd, steps, 3, 0);
    CHECK(back == start);
    CHECK(replay_steps(start, steps, 1, 2).angle == 9);
    CHECK(replay_steps(start, steps, 2, 1).angle == -9);
    const std::vector<datagen::TrajectoryStep> still(3, {StepKind::translation, 0, 0, 0});
    CHECK(replay_steps(start, still, 0, 3) == start);
  }

  TEST_CASE("evaluation pairs") {
    const DatasetConfig cfg;
    const auto bgs = datagen::gen_background_pool(cfg, Split::test);
    const auto digits = blob_sprites(10);
    const auto pairs = make_eval_set(200, 5, cfg, bgs, digits);
    for (const auto& p : pairs) {
      CHECK(p.indices.i != p.indices.j);
      CHECK(p.seq1.recipe.background_id != p.seq2.recipe.background_id);
      CHECK(p.seq1.recipe.objects[0].digit_index != p.seq2.recipe.objects[0].digit_index);
      CHECK(p.background2 == bgs[static_cast<std::size_t>(p.seq2.recipe.background_id)].rendered);
      for (const Tensor* t : {&p.background_target, &p.transform_target})
        for (float v : t->values()) REQUIRE((v >= 0.f && v <= 1.f));
      // The background target keeps seq1's object exactly where it is in frame j.
      const auto direct = datagen::render_frame(digits[p.seq1.recipe.objects[0].digit_index],
                                                p.seq1.recipe.objects[0].poses[p.indices.j],
                                                bgs[p.seq2.recipe.background_id]);
      CHECK(direct.frame == p.background_target);
    }
    const auto again = make_eval_set(3, 5, cfg, bgs, digits);
    CHECK(again[2].background_target == pairs[2].background_target);

    Rng rng(9);
    for (int k = 0; k < 10000; ++k) {
      const auto p = datagen::sample_frame_indices(rng, cfg.frames);
      REQUIRE(p.i != p.j);
    }
  }

  TEST_CASE("index contract over many pairs") {
    const DatasetConfig cfg;
    const auto bgs = datagen::gen_background_pool(cfg, Split::test);
    const auto pairs = make_eval_set(2000, 6, cfg, bgs, blob_sprites(10));
    for (const auto& p : pairs) REQUIRE(p.indices.i != p.indices.j);
  }

  TEST_CASE("identity steps leave the transform target at frame i") {
    DatasetConfig cfg;
    cfg.rotation_probability = 0.0;
    cfg.translation_set = {0};  // outside validate(): an edge configuration for this check only
    const auto bgs = datagen::gen_background_pool(DatasetConfig{}, Split::test);
    Rng rng(10);
    for (int k = 0; k < 20; ++k) {
      const auto p = make_eval_pair(rng, cfg, bgs, blob_sprites(4));
      CHECK(p.transform_target == p.seq2.frame(p.indices.i));
    }
  }

  TEST_CASE("baselines") {
    DatasetConfig cfg;
    const auto bgs = datagen::gen_background_pool(cfg, Split::test);
    SUBCASE("two frames") {
      cfg.frames = 2;
      const auto pairs = make_eval_set(20, 7, cfg, bgs, blob_sprites(6));
      const auto s = baseline_video_frames(pairs);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        CHECK(p.indices.i + p.indices.j == 1);
        CHECK(s.mse[k] == mse(p.seq1.frame(p.indices.i), p.seq1.frame(p.indices.j)));
      }
    }
    SUBCASE("no object") {
      const auto pairs = make_eval_set(20, 8, cfg, bgs, blob_sprites(6));
      const auto s = baseline_no_object(pairs);
      for (std::size_t k = 0; k < pairs.size(); ++k) CHECK(s.mse[k] == mse(pairs[k].background2, pairs[k].background_target));
      CHECK(s.count == 20);
    }
    SUBCASE("empty objects") {
      const auto pairs = make_eval_set(10, 9, cfg, bgs, blob_sprites(4, 0.f));
      const auto s = baseline_no_object(pairs);
      for (double v : s.mse) CHECK(v == 0.0);
      CHECK(s.infinite_psnr == 10);
    }
    SUBCASE("reproducible") {
      const auto a = baseline_video_frames(make_eval_set(30, 10, cfg, bgs, blob_sprites(6)));
      const auto b = baseline_video_frames(make_eval_set(30, 10, cfg, bgs, blob_sprites(6)));
      CHECK(a.mse == b.mse);
      CHECK(a.mean_psnr == b.mean_psnr);
    }
  }

  TEST_CASE("manipulation metrics run on a fresh model") {
    const DatasetConfig cfg;
    const auto bgs = datagen::gen_background_pool(cfg, Split::test);
    const auto pairs = make_eval_set(6, 11, cfg, bgs, blob_sprites(6));
    model::SceneModel m(model::ModelConfig::desk_cpu());
    const auto bg = eval_background_manip(m, pairs, 4);
    const auto tr = eval_transform_manip(m, pairs, 4);
    CHECK(bg.count == 6);
    CHECK(tr.count == 6);
    // Batch size does not change the numbers.
    CHECK(eval_background_manip(m, pairs, 1).mse == bg.mse);
    const Tensor out = m.compose_h(pairs[0].seq1.frame(pairs[0].indices.i), pairs[0].seq1.frame(pairs[0].indices.j),
                                   pairs[0].seq1.frame(pairs[0].indices.i), pairs[0].seq2.frame(pairs[0].indices.i));
    CHECK(bg.mse[0] == mse(out, pairs[0].background_target));
  }

  TEST_CASE("transform statistics") {
    const DatasetConfig cfg;
    const auto digits = blob_sprites(10);
    const auto one = analyze_transform_stats(TransformSource::ground_truth, nullptr, 1, 3, cfg, digits);
    CHECK(one.count == 1);
    CHECK(one.mean == one.max);
    CHECK(one.mean == one.min);
    const auto many = analyze_transform_stats(TransformSource::ground_truth, nullptr, 2000, 3, cfg, digits);
    CHECK(many.frame == warp::CoordFrame::pixel);
    CHECK(many.has_displacement);
    CHECK(many.displacement_max_abs[0] <= 40.0);
    CHECK(many.displacement_max_abs[1] <= 40.0);
    const auto again = analyze_transform_stats(TransformSource::ground_truth, nullptr, 2000, 3, cfg, digits);
    CHECK(again.mean == many.mean);

    model::SceneModel m(model::ModelConfig::desk_cpu());
    const auto learned = analyze_transform_stats(TransformSource::learned, &m, 4, 3, cfg, digits);
    CHECK(learned.frame == warp::CoordFrame::normalized);
    CHECK(learned.mean == std::array<double, 6>{1, 0, 0, 0, 1, 0});
    CHECK_THROWS(analyze_transform_stats(TransformSource::learned, nullptr, 4, 3, cfg, digits));
    CHECK(transform_source_from_string("gt") == TransformSource::ground_truth);
  }

  TEST_CASE("report files") {
    const auto dir = oracle::temp_dir("report");
    std::vector<MetricSummary> s{summarize("background_manip", {0.01, 0.02, 0.03}),
                                 summarize("transform_manip", {0.02, 0.01, 0.0}),
                                 summarize("video_frames", {0.05, 0.04, 0.06}),
                                 summarize("no_object", {0.03, 0.02, 0.01})};
    emit_report(s, dir);
    const auto j = nlohmann::json::parse(std::ifstream(dir / "stats.json"));
    REQUIRE(j.size() == 4);
    CHECK(j.at("background_manip").at("count") == 3);
    CHECK(j.at("background_manip").at("mse").at("median").get<double>() == doctest::Approx(0.02));
    CHECK(j.at("background_manip").at("psnr").at("mean").get<double>() == s[0].mean_psnr);
    CHECK(j.at("transform_manip").at("psnr").at("infinite_excluded") == 1);
    const std::string svg = oracle::read_bytes(dir / "mse_boxplot.svg");
    int boxes = 0;
    for (std::size_t p = svg.find("<rect x="); p != std::string::npos; p = svg.find("<rect x=", p + 1)) ++boxes;
    CHECK(boxes == 4);
    CHECK(oracle::read_bytes(dir / "psnr_table.md").find("no_object") != std::string::npos);
  }
}
