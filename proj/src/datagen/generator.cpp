// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/datagen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eqscene/datagen/named_colors.hpp"
#include "eqscene/model/config.hpp"

namespace eqscene::datagen {

namespace {

// Stream tags keep background and sequence streams disjoint.
constexpr std::uint64_t kBackgroundStream = 0x6267;
constexpr std::uint64_t kSequenceStream = 0x7365;

double sprite_center(int digit_size) { return (digit_size - 1) / 2.0; }

float sample_sprite(const DigitSprite& s, double qx, double qy) {
  const double fx0 = std::floor(qx);
  const double fy0 = std::floor(qy);
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double fx = qx - fx0;
  const double fy = qy - fy0;
  auto at = [&](int x, int y) -> double {
    return (x >= 0 && x < kDigitSize && y >= 0 && y < kDigitSize) ? s.at(x, y) : 0.0;
  };
  const double v = (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
                   fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
  return static_cast<float>(v);
}

}  // namespace

// ------------------------------------------------------------------ config

void DatasetConfig::validate() const {
  if (frames < 2) throw ContractError("dataset config: need at least 2 frames per sequence");
  if (digits_per_video < 1) throw ContractError("dataset config: need at least one digit per video");
  if (canvas < digit_size) throw ContractError("dataset config: canvas smaller than a digit");
  if (backgrounds_per_split < 1) throw ContractError("dataset config: empty background pool");
  if (rotation_set.empty() && translation_set.empty()) throw ContractError("dataset config: no step values");
  for (int v : rotation_set)
    if (v == 0) throw ContractError("dataset config: rotation set must exclude 0");
  for (int v : translation_set)
    if (v == 0) throw ContractError("dataset config: translation set must exclude 0");
  if (rotation_probability < 0.0 || rotation_probability > 1.0) {
    throw ContractError("dataset config: rotation_probability outside [0, 1]");
  }
  if (max_redo < 1) throw ContractError("dataset config: max_redo must be positive");
}

nlohmann::json DatasetConfig::to_json() const {
  return {{"frames", frames},
          {"digits_per_video", digits_per_video},
          {"canvas", canvas},
          {"digit_size", digit_size},
          {"backgrounds_per_split", backgrounds_per_split},
          {"rotation_set", rotation_set},
          {"translation_set", translation_set},
          {"rotation_probability", rotation_probability},
          {"seed", seed},
          {"max_redo", max_redo},
          {"alpha_min", alpha_min}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.frames = j.value("frames", c.frames);
  c.digits_per_video = j.value("digits_per_video", c.digits_per_video);
  c.canvas = j.value("canvas", c.canvas);
  c.digit_size = j.value("digit_size", c.digit_size);
  c.backgrounds_per_split = j.value("backgrounds_per_split", c.backgrounds_per_split);
  c.rotation_set = j.value("rotation_set", c.rotation_set);
  c.translation_set = j.value("translation_set", c.translation_set);
  c.rotation_probability = j.value("rotation_probability", c.rotation_probability);
  c.seed = j.value("seed", c.seed);
  c.max_redo = j.value("max_redo", c.max_redo);
  c.alpha_min = j.value("alpha_min", c.alpha_min);
  c.validate();
  return c;
}

std::string DatasetConfig::hash() const { return model::json_digest(to_json()); }

// --------------------------------------------------------------- geometry

AffineParams screen_rotation(double degrees, warp::Point center) {
  // y points down on the canvas, so on-screen counterclockwise is a negative
  // angle for the [[c, -s], [s, c]] matrix.
  return warp::make_rotation(-degrees, center, warp::CoordFrame::pixel);
}

AffineParams placement(const Pose& pose, int digit_size) {
  const double s = sprite_center(digit_size);
  return warp::compose(warp::make_translation(pose.x, pose.y),
                       warp::compose(screen_rotation(pose.angle, {0.0, 0.0}), warp::make_translation(-s, -s)));
}

Pose advance(const Pose& pose, const TrajectoryStep& step) {
  Pose p = pose;
  if (step.kind == StepKind::rotation) {
    p.angle += step.degrees;
  } else {
    p.x += step.dx;
    p.y += step.dy;
  }
  return p;
}

Pose retreat(const Pose& pose, const TrajectoryStep& step) {
  Pose p = pose;
  if (step.kind == StepKind::rotation) {
    p.angle -= step.degrees;
  } else {
    p.x -= step.dx;
    p.y -= step.dy;
  }
  return p;
}

AffineParams step_affine(const Pose& before, const TrajectoryStep& step) {
  if (step.kind == StepKind::rotation) return screen_rotation(step.degrees, {before.x, before.y});
  return warp::make_translation(step.dx, step.dy);
}

// ------------------------------------------------------------- backgrounds

Rgb color_rgb(int index) {
  const auto& c = named_colors().at(static_cast<std::size_t>(index));
  return {c.r / 255.0f, c.g / 255.0f, c.b / 255.0f};
}

Tensor render_background(const Rgb& base, std::span<const Diamond> diamonds, int canvas) {
  Tensor img(Shape{1, 3, canvas, canvas});
  for (int y = 0; y < canvas; ++y) {
    for (int x = 0; x < canvas; ++x) {
      Rgb c = base;
      for (const auto& d : diamonds) {
        if (d.contains(x, y)) c = d.color;  // later diamonds overdraw earlier ones
      }
      img(0, 0, y, x) = c.r;
      img(0, 1, y, x) = c.g;
      img(0, 2, y, x) = c.b;
    }
  }
  return img;
}

BackgroundSpec gen_background(Rng& rng, int id, Split split, int canvas) {
  BackgroundSpec bg;
  bg.id = id;
  bg.split = split;
  std::vector<Rgb> used;
  auto draw_distinct = [&](int& index) {
    for (;;) {
      index = static_cast<int>(rng.below(kNumNamedColors));
      const Rgb c = color_rgb(index);
      if (std::find(used.begin(), used.end(), c) == used.end()) {
        used.push_back(c);
        return c;
      }
    }
  };
  bg.base = draw_distinct(bg.base_index);
  for (auto& d : bg.diamonds) {
    d.cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas)));
    d.cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas)));
    d.radius = static_cast<int>(rng.between(7, 10));
    d.color = draw_distinct(d.color_index);
  }
  bg.rendered = render_background(bg.base, bg.diamonds, canvas);
  return bg;
}

std::vector<BackgroundSpec> gen_background_pool(const DatasetConfig& cfg, Split split) {
  std::vector<BackgroundSpec> pool;
  pool.reserve(static_cast<std::size_t>(cfg.backgrounds_per_split));
  for (int k = 0; k < cfg.backgrounds_per_split; ++k) {
    Rng rng = Rng::derive(cfg.seed, {kBackgroundStream, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(k)});
    pool.push_back(gen_background(rng, k, split, cfg.canvas));
  }
  return pool;
}

// ----------------------------------------------------------------- motion

TrajectoryStep sample_step(Rng& rng, const DatasetConfig& cfg) {
  TrajectoryStep s;
  bool rotate = rng.uniform() < cfg.rotation_probability;
  if (cfg.rotation_set.empty()) rotate = false;
  if (cfg.translation_set.empty()) rotate = true;
  if (rotate) {
    s.kind = StepKind::rotation;
    s.degrees = rng.pick<int>(cfg.rotation_set);
  } else {
    s.kind = StepKind::translation;
    s.dx = rng.pick<int>(cfg.translation_set);
    s.dy = rng.pick<int>(cfg.translation_set);
  }
  return s;
}

Tensor render_alpha(const DigitSprite& sprite, const Pose& pose, int canvas) {
  Tensor a(Shape{1, 1, canvas, canvas});
  const AffineParams inv = warp::invert(placement(pose));
  for (int y = 0; y < canvas; ++y) {
    for (int x = 0; x < canvas; ++x) {
      const warp::Point q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      a(0, 0, y, x) = sample_sprite(sprite, q.x, q.y);
    }
  }
  return a;
}

bool fits_canvas(const DigitSprite& sprite, const Pose& pose, int canvas, float alpha_min) {
  // Only sprite pixels above alpha_min can produce canvas alpha above it, and
  // only within one sprite pixel of their mapped centers.
  const AffineParams fwd = placement(pose);
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  for (int y = 0; y < kDigitSize; ++y) {
    for (int x = 0; x < kDigitSize; ++x) {
      if (sprite.at(x, y) <= alpha_min) continue;
      const warp::Point p = fwd.apply({static_cast<double>(x), static_cast<double>(y)});
      lo_x = std::min(lo_x, p.x);
      hi_x = std::max(hi_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_y = std::max(hi_y, p.y);
    }
  }
  if (!(lo_x <= hi_x)) return true;  // empty sprite
  const int x0 = static_cast<int>(std::floor(lo_x - 1.5));
  const int x1 = static_cast<int>(std::ceil(hi_x + 1.5));
  const int y0 = static_cast<int>(std::floor(lo_y - 1.5));
  const int y1 = static_cast<int>(std::ceil(hi_y + 1.5));
  if (x0 >= 0 && y0 >= 0 && x1 < canvas && y1 < canvas) return true;
  const AffineParams inv = warp::invert(fwd);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (x >= 0 && x < canvas && y >= 0 && y < canvas) continue;
      const warp::Point q = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      if (sample_sprite(sprite, q.x, q.y) > alpha_min) return false;
    }
  }
  return true;
}

RenderedFrame render_frame(std::span<const DigitSprite* const> sprites, std::span<const Pose> poses,
                           const BackgroundSpec& background) {
  if (sprites.size() != poses.size()) throw ContractError("render_frame: one pose per sprite required");
  const int canvas = background.rendered.h();
  RenderedFrame out{background.rendered, Tensor(Shape{1, 1, canvas, canvas})};
  for (std::size_t k = 0; k < sprites.size(); ++k) {
    const Tensor a = render_alpha(*sprites[k], poses[k], canvas);
    for (int y = 0; y < canvas; ++y) {
      for (int x = 0; x < canvas; ++x) {
        const float al = a(0, 0, y, x);
        if (al <= 0.f) continue;
        for (int c = 0; c < 3; ++c) {
          float& v = out.frame(0, c, y, x);
          v = std::clamp(al + (1.f - al) * v, 0.f, 1.f);
        }
        float& m = out.alpha(0, 0, y, x);
        m = std::clamp(al + (1.f - al) * m, 0.f, 1.f);
      }
    }
  }
  return out;
}

RenderedFrame render_frame(const DigitSprite& sprite, const Pose& pose, const BackgroundSpec& background) {
  const DigitSprite* s[] = {&sprite};
  return render_frame(std::span<const DigitSprite* const>(s), std::span<const Pose>(&pose, 1), background);
}

ObjectTrack plan_track(const DigitSprite& sprite, int digit_index, Rng& rng, const DatasetConfig& cfg,
                       std::uint64_t seed_for_errors) {
  ObjectTrack t;
  t.digit_index = digit_index;
  t.label = sprite.label;
  const double c = sprite_center(cfg.digit_size);
  Pose pose{static_cast<double>(rng.between(0, cfg.canvas - cfg.digit_size)) + c,
            static_cast<double>(rng.between(0, cfg.canvas - cfg.digit_size)) + c, 0.0};
  t.poses.push_back(pose);
  for (int k = 1; k < cfg.frames; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_redo && !placed; ++attempt) {
      const TrajectoryStep step = sample_step(rng, cfg);
      const Pose next = advance(pose, step);
      if (fits_canvas(sprite, next, cfg.canvas, cfg.alpha_min)) {
        t.steps.push_back(step);
        t.poses.push_back(next);
        pose = next;
        placed = true;
      }
    }
    if (!placed) {
      throw RuntimeError("trajectory generation exceeded max_redo=" + std::to_string(cfg.max_redo) +
                         " at frame " + std::to_string(k) + " (seed " + std::to_string(seed_for_errors) + ")");
    }
  }
  return t;
}

VideoSequence render_sequence(const SequenceRecipe& recipe, std::span<const DigitSprite> sprites,
                              std::span<const BackgroundSpec> backgrounds, const DatasetConfig& cfg) {
  const auto bg_it = std::find_if(backgrounds.begin(), backgrounds.end(),
                                  [&](const BackgroundSpec& b) { return b.id == recipe.background_id; });
  if (bg_it == backgrounds.end()) throw ContractError("render_sequence: unknown background id");
  const int m = cfg.frames;
  VideoSequence seq;
  seq.recipe = recipe;
  seq.frames = Tensor(Shape{m, 3, cfg.canvas, cfg.canvas});
  seq.alpha = Tensor(Shape{m, 1, cfg.canvas, cfg.canvas});
  std::vector<const DigitSprite*> objs;
  for (const auto& o : recipe.objects) {
    if (o.digit_index < 0 || static_cast<std::size_t>(o.digit_index) >= sprites.size()) {
      throw ContractError("render_sequence: digit index out of range");
    }
    if (static_cast<int>(o.poses.size()) != m) throw ContractError("render_sequence: pose count != frames");
    objs.push_back(&sprites[static_cast<std::size_t>(o.digit_index)]);
  }
  std::vector<Pose> poses(objs.size());
  for (int k = 0; k < m; ++k) {
    for (std::size_t o = 0; o < objs.size(); ++o) poses[o] = recipe.objects[o].poses[static_cast<std::size_t>(k)];
    const RenderedFrame f = render_frame(objs, poses, *bg_it);
    std::copy(f.frame.storage().begin(), f.frame.storage().end(), seq.frames.item(k).begin());
    std::copy(f.alpha.storage().begin(), f.alpha.storage().end(), seq.alpha.item(k).begin());
  }
  return seq;
}

VideoSequence simulate_trajectory(const DigitSprite& sprite, const BackgroundSpec& background, Rng& rng,
                                  const DatasetConfig& cfg) {
  if (sprite.split != background.split) throw ContractError("simulate_trajectory: sprite and background splits differ");
  cfg.validate();
  SequenceRecipe r;
  r.split = sprite.split;
  r.background_id = background.id;
  r.objects.push_back(plan_track(sprite, 0, rng, cfg, cfg.seed));
  return render_sequence(r, std::span<const DigitSprite>(&sprite, 1), std::span<const BackgroundSpec>(&background, 1),
                         cfg);
}

SequenceRecipe plan_sequence(int id, Split split, std::span<const DigitSprite> sprites, const DatasetConfig& cfg) {
  if (sprites.empty()) throw ContractError("plan_sequence: no digits in split " + to_string(split));
  const std::uint64_t seed = cfg.seed;
  Rng rng = Rng::derive(seed, {kSequenceStream, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(id)});
  SequenceRecipe r;
  r.id = id;
  r.split = split;
  r.seed = seed;
  r.background_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.backgrounds_per_split)));
  for (int k = 0; k < cfg.digits_per_video; ++k) {
    const int d = static_cast<int>(rng.below(sprites.size()));
    r.objects.push_back(plan_track(sprites[static_cast<std::size_t>(d)], d, rng, cfg, seed));
  }
  return r;
}

AffineParams ground_truth_affine(const SequenceRecipe& seq, int i, int j, int object) {
  if (object < 0 || static_cast<std::size_t>(object) >= seq.objects.size()) {
    throw ContractError("ground_truth_affine: object index out of range");
  }
  const ObjectTrack& t = seq.objects[static_cast<std::size_t>(object)];
  const int m = static_cast<int>(t.poses.size());
  if (i < 0 || j < 0 || i >= m || j >= m) {
    throw ContractError("ground_truth_affine: frame index out of range [0, " + std::to_string(m) + ")");
  }
  if (i > j) return warp::invert(ground_truth_affine(seq, j, i, object));
  AffineParams g = AffineParams::identity();
  for (int k = i; k < j; ++k) {
    g = warp::compose(step_affine(t.poses[static_cast<std::size_t>(k)], t.steps[static_cast<std::size_t>(k)]), g);
  }
  return g;
}

FramePair sample_frame_indices(Rng& rng, int frames) {
  if (frames < 2) throw ContractError("need at least two frames to sample a pair");
  FramePair p;
  p.i = static_cast<int>(rng.below(static_cast<std::uint64_t>(frames)));
  p.j = static_cast<int>(rng.below(static_cast<std::uint64_t>(frames - 1)));
  if (p.j >= p.i) ++p.j;
  return p;
}

TrainingPair sample_training_pair(const VideoSequence& seq, Rng& rng) {
  const FramePair p = sample_frame_indices(rng, seq.num_frames());
  return {seq.frame(p.i), seq.frame(p.j), p};
}

// ------------------------------------------------------------------- json

nlohmann::json to_json(const TrajectoryStep& s) {
  if (s.kind == StepKind::rotation) return {{"kind", "rotation"}, {"degrees", s.degrees}};
  return {{"kind", "translation"}, {"dx", s.dx}, {"dy", s.dy}};
}

TrajectoryStep step_from_json(const nlohmann::json& j) {
  TrajectoryStep s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rotation") {
    s.kind = StepKind::rotation;
    s.degrees = j.at("degrees").get<int>();
  } else if (kind == "translation") {
    s.kind = StepKind::translation;
    s.dx = j.at("dx").get<int>();
    s.dy = j.at("dy").get<int>();
  } else {
    throw DataFormatError("unknown step kind '" + kind + "'");
  }
  return s;
}

nlohmann::json to_json(const SequenceRecipe& r) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : r.objects) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : o.steps) steps.push_back(to_json(s));
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& p : o.poses) poses.push_back({p.x, p.y, p.angle});
    objs.push_back({{"digit_index", o.digit_index}, {"label", o.label}, {"poses", poses}, {"steps", steps}});
  }
  return {{"id", r.id},
          {"split", to_string(r.split)},
          {"seed", r.seed},
          {"background_id", r.background_id},
          {"objects", objs}};
}

SequenceRecipe recipe_from_json(const nlohmann::json& j) {
  SequenceRecipe r;
  r.id = j.at("id").get<int>();
  r.split = split_from_string(j.at("split").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.background_id = j.at("background_id").get<int>();
  for (const auto& o : j.at("objects")) {
    ObjectTrack t;
    t.digit_index = o.at("digit_index").get<int>();
    t.label = o.at("label").get<int>();
    for (const auto& p : o.at("poses")) t.poses.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    for (const auto& s : o.at("steps")) t.steps.push_back(step_from_json(s));
    if (t.steps.size() + 1 != t.poses.size()) throw DataFormatError("recipe: steps/poses length mismatch");
    r.objects.push_back(std::move(t));
  }
  return r;
}

nlohmann::json to_json(const BackgroundSpec& b) {
  auto rgb = [](const Rgb& c) { return nlohmann::json::array({c.r, c.g, c.b}); };
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : b.diamonds) {
    ds.push_back({{"center", {d.cx, d.cy}},
                  {"radius", d.radius},
                  {"color", named_colors()[static_cast<std::size_t>(d.color_index)].name},
                  {"rgb", rgb(d.color)}});
  }
  return {{"id", b.id},
          {"split", to_string(b.split)},
          {"base_color", named_colors()[static_cast<std::size_t>(b.base_index)].name},
          {"base_rgb", rgb(b.base)},
          {"diamonds", ds}};
}

}  // namespace eqscene::datagen
