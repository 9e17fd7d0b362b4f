// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "eqscene/model/checkpoint.hpp"
#include "eqscene/model/scene_model.hpp"
#include "eqscene/warp/warp.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace eqscene;
using namespace eqscene::model;

namespace {

ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.image_size = 16;
  c.latent_size = 8;
  c.latent_channels = 4;
  c.stem_channels = 4;
  c.residual_blocks = 1;
  c.hidden_size = 8;
  c.seed = seed;
  return c;
}

Tensor random_tensor(Rng& rng, Shape s, double lo = 0, double hi = 1) {
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

double max_abs(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, double(std::abs(a[i] - b[i])));
  return m;
}

bool is_identity(const AffineParams& a) {
  return a.a11 == 1.0 && a.a12 == 0.0 && a.tx == 0.0 && a.a21 == 0.0 && a.a22 == 1.0 && a.ty == 0.0 &&
         a.frame == warp::CoordFrame::normalized;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("default code shape") {
    SceneModel m(ModelConfig{});
    Rng rng(51);
    const Tensor x = random_tensor(rng, m.frame_shape(2));
    const Tensor z = m.encode_object(x);
    CHECK(z.shape() == Shape{2, 64, 16, 16});
    CHECK(m.encode_background(x).shape() == Shape{2, 64, 16, 16});
    CHECK(m.render(z).shape() == Shape{2, 3, 64, 64});
    CHECK(ModelConfig{}.embed_size() == 128);
  }

  TEST_CASE("deterministic and batch-consistent") {
    SceneModel m(ModelConfig::desk_cpu());
    Rng rng(52);
    const Tensor x = random_tensor(rng, m.frame_shape(4));
    const Tensor zo = m.encode_object(x);
    CHECK(zo == m.encode_object(x));
    const Tensor zb = m.encode_background(x);
    const Tensor img = m.render(SceneModel::compose_scene(zo, zb));
    CHECK(img == m.render(SceneModel::compose_scene(zo, zb)));
    for (int b = 0; b < 4; ++b) {
      const Tensor xb = slice_batch(x, b, 1);
      CHECK(max_abs(m.encode_object(xb), slice_batch(zo, b, 1)) < 1e-5);
      CHECK(max_abs(m.encode_background(xb), slice_batch(zb, b, 1)) < 1e-5);
      CHECK(max_abs(m.render(SceneModel::compose_scene(slice_batch(zo, b, 1), slice_batch(zb, b, 1))),
                    slice_batch(img, b, 1)) < 1e-5);
    }
  }

  TEST_CASE("fresh transform network predicts the identity") {
    SceneModel m(ModelConfig::desk_cpu());
    Rng rng(53);
    const Tensor z1 = random_tensor(rng, m.code_shape(100), -2, 2);
    const Tensor z2 = random_tensor(rng, m.code_shape(100), -2, 2);
    for (const auto& a : m.predict_transform(z1, z2)) CHECK(is_identity(a));
  }

  TEST_CASE("order dependence once the output layer is non-zero") {
    SceneModel m(tiny_config());
    gradcheck::randomize_transform_output(m, 1);
    Rng rng(54);
    const Tensor z1 = random_tensor(rng, m.code_shape(1), -1, 1);
    const Tensor z2 = random_tensor(rng, m.code_shape(1), -1, 1);
    CHECK(!(m.predict_theta(z1, z2) == m.predict_theta(z2, z1)));
  }

  TEST_CASE("transform gradients match central differences") {
    SceneModel m(tiny_config());
    gradcheck::randomize_transform_output(m, 2);
    Rng rng(55);
    int compared = 0;
    double forward_error = 0;
    for (int k = 0; k < 20; ++k) {
      const auto r = gradcheck::transform_case(m, rng, &forward_error);
      compared += r.compared;
      CHECK(r.worst_rel < 1e-3);
    }
    CHECK(compared >= 100);
    CHECK(forward_error < 1e-5);
  }

  TEST_CASE("apply_transform") {
    Rng rng(56);
    const Tensor z = random_tensor(rng, {2, 3, 16, 16}, -1, 1);
    const std::vector<AffineParams> id(2, AffineParams::identity(warp::CoordFrame::normalized));
    CHECK(max_abs(SceneModel::apply_transform(id, z), z) < 1e-6);
    CHECK(SceneModel::apply_transform(id, Tensor(z.shape())) == Tensor(z.shape()));

    const std::vector<AffineParams> shift{warp::pixel_to_normalized(warp::make_translation(2, -1), 16, 16),
                                          warp::pixel_to_normalized(warp::make_translation(-3, 0), 16, 16)};
    const Tensor out = SceneModel::apply_transform(shift, z);
    const int dx[] = {2, -3};
    const int dy[] = {-1, 0};
    for (int n = 0; n < 2; ++n)
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) {
            const int sx = x + dx[n];
            const int sy = y + dy[n];
            const float want = (sx >= 0 && sx < 16 && sy >= 0 && sy < 16) ? z(n, c, sy, sx) : 0.f;
            REQUIRE(std::abs(out(n, c, y, x) - want) < 1e-6);
          }
  }

  TEST_CASE("compose_scene") {
    Rng rng(57);
    const Tensor a = random_tensor(rng, {2, 3, 4, 4}, -1, 1);
    const Tensor b = random_tensor(rng, {2, 3, 4, 4}, -1, 1);
    CHECK(SceneModel::compose_scene(a, Tensor(a.shape())) == a);
    CHECK(SceneModel::compose_scene(a, b) == SceneModel::compose_scene(b, a));
    Tensor a2 = a;
    for (auto& v : a2.values()) v *= 2.f;
    Tensor twice = SceneModel::compose_scene(a, Tensor(a.shape()));
    for (auto& v : twice.values()) v *= 2.f;
    CHECK(SceneModel::compose_scene(a2, Tensor(a.shape())) == twice);
    CHECK_THROWS_AS(SceneModel::compose_scene(a, Tensor(Shape{1, 3, 4, 4})), ContractError);
  }

  TEST_CASE("render bounds") {
    SceneModel m(ModelConfig::desk_cpu());
    Rng rng(58);
    const Tensor out = m.render(random_tensor(rng, m.code_shape(3), -20, 20));
    for (float v : out.values()) REQUIRE((v >= 0.f && v <= 1.f));
  }

  TEST_CASE("forward_pair and h-composition at initialization") {
    SceneModel m(tiny_config());
    Rng rng(59);
    const Tensor x1 = random_tensor(rng, m.frame_shape(3));
    const Tensor x2 = random_tensor(rng, m.frame_shape(3));
    const auto out = m.forward_pair(x1, x2);
    CHECK(out.x2_hat == m.render(SceneModel::compose_scene(m.encode_object(x1), m.encode_background(x1))));
    CHECK(out.z_o1_warped == out.z_o1);
    CHECK(m.compose_h(x1, x2, x1, x1) == out.x2_hat);
    CHECK(m.compose_h(x1, x1, x1, x1) ==
          m.render(SceneModel::compose_scene(m.encode_object(x1), m.encode_background(x1))));
    const auto same = m.forward_pair(x1, x1);
    for (float v : same.x2_hat.values()) REQUIRE(std::isfinite(v));
    CHECK_THROWS_AS(m.forward_pair(x1, slice_batch(x2, 0, 1)), ContractError);
  }

  TEST_CASE("h with supplied transforms") {
    SceneModel m(tiny_config());
    gradcheck::randomize_transform_output(m, 3);
    Rng rng(60);
    const Tensor x1 = random_tensor(rng, m.frame_shape(2));
    const Tensor x2 = random_tensor(rng, m.frame_shape(2));
    const Tensor x3 = random_tensor(rng, m.frame_shape(2));
    const Tensor x4 = random_tensor(rng, m.frame_shape(2));
    const auto t = m.predict_transform(m.encode_object(x1), m.encode_object(x2));
    CHECK(m.compose_h(x1, x2, x3, x4) == m.compose_h_with(t, x3, x4));
    // After the change the model also mixes sources.
    const auto out = m.forward_pair(x1, x2);
    CHECK(m.compose_h(x1, x2, x1, x1) == out.x2_hat);
  }

  TEST_CASE("parameter registry") {
    SceneModel m(ModelConfig::desk_cpu());
    const auto params = m.parameters();
    std::set<std::string> names;
    std::set<const nn::Param*> ptrs;
    for (auto* p : params) {
      names.insert(p->name);
      ptrs.insert(p);
    }
    CHECK(names.size() == params.size());
    CHECK(ptrs.size() == params.size());
    const auto g = m.parameter_groups();
    CHECK(g.object_encoder.size() + g.background_encoder.size() + g.renderer.size() + g.transform.size() ==
          params.size());
    CHECK(!g.object_encoder.empty());
    CHECK(!g.transform.empty());
  }

  TEST_CASE("seeds") {
    ModelConfig a = tiny_config(1);
    ModelConfig b = tiny_config(2);
    SceneModel ma(a);
    SceneModel mb(b);
    SceneModel ma2(a);
    CHECK(ma.parameters()[0]->value == ma2.parameters()[0]->value);
    CHECK(!(ma.parameters()[0]->value == mb.parameters()[0]->value));
    CHECK(a.hash() == b.hash());
    CHECK(ModelConfig::from_json(a.to_json()).to_json() == a.to_json());
    ModelConfig bad = a;
    bad.latent_size = 5;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("checkpoint round trip") {
    const auto dir = oracle::temp_dir("ckpt");
    SceneModel m(tiny_config(4));
    gradcheck::randomize_transform_output(m, 4);
    std::vector<Tensor> aux{Tensor(Shape{1, 1, 2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6})};
    save_checkpoint(dir / "a.ckpt", m, 17, 99, {{"note", "x"}}, aux);
    const auto ck = read_checkpoint(dir / "a.ckpt");
    CHECK(ck.step == 17);
    CHECK(ck.seed == 99);
    CHECK(ck.extra.at("note") == "x");
    REQUIRE(ck.aux.size() == 1);
    CHECK(ck.aux[0] == aux[0]);
    const auto loaded = load_model(dir / "a.ckpt");
    Rng rng(61);
    const Tensor x1 = random_tensor(rng, m.frame_shape(2));
    const Tensor x2 = random_tensor(rng, m.frame_shape(2));
    CHECK(loaded->forward_pair(x1, x2).x2_hat == m.forward_pair(x1, x2).x2_hat);

    SceneModel other(ModelConfig::desk_cpu());
    CHECK_THROWS(load_parameters(other, ck));

    const std::string bytes = oracle::read_bytes(dir / "a.ckpt");
    std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    CHECK_THROWS_AS(read_checkpoint(dir / "trunc.ckpt"), DataFormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    std::ofstream(dir / "magic.ckpt", std::ios::binary) << bad;
    CHECK_THROWS_AS(read_checkpoint(dir / "magic.ckpt"), DataFormatError);
  }
}
