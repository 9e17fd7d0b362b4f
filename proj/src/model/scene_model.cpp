// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/model/scene_model.hpp"

#include "eqscene/warp/warp.hpp"

namespace eqscene::model {

namespace {

void build_encoder(nn::Sequential& net, const std::string& prefix, const ModelConfig& c) {
  net.add<nn::Conv2d>(prefix + ".stem", c.image_channels, c.stem_channels, 3, 1, 1);
  net.add<nn::ReLU>();
  int ch = c.stem_channels;
  const int stages = c.downsampling_stages();
  for (int s = 0; s < stages; ++s) {
    net.add<nn::Conv2d>(prefix + ".down" + std::to_string(s), ch, c.latent_channels, 4, 2, 1);
    ch = c.latent_channels;
    if (s + 1 < stages) net.add<nn::ReLU>();
  }
  for (int r = 0; r < c.residual_blocks; ++r) {
    const std::string name = prefix + ".res" + std::to_string(r);
    nn::Sequential body(name);
    body.add<nn::ReLU>();
    body.add<nn::Conv2d>(name + ".conv0", ch, ch, 3, 1, 1);
    body.add<nn::ReLU>();
    body.add<nn::Conv2d>(name + ".conv1", ch, ch, 3, 1, 1, 0.1f);
    net.add<nn::Residual>(std::move(body));
  }
}

// Mirror of the encoder without skip connections.
void build_renderer(nn::Sequential& net, const std::string& prefix, const ModelConfig& c) {
  const int ch = c.latent_channels;
  for (int r = 0; r < c.residual_blocks; ++r) {
    net.add<nn::Conv2d>(prefix + ".block" + std::to_string(r), ch, ch, 3, 1, 1);
    net.add<nn::ReLU>();
  }
  const int stages = c.downsampling_stages();
  for (int s = 0; s < stages; ++s) {
    const int out = (s + 1 == stages) ? c.stem_channels : ch;
    net.add<nn::ConvTranspose2d>(prefix + ".up" + std::to_string(s), ch, out, 4, 2, 1);
    net.add<nn::ReLU>();
  }
  net.add<nn::Conv2d>(prefix + ".out", c.stem_channels, c.image_channels, 3, 1, 1);
  net.add<nn::Sigmoid>();
}

}  // namespace

// ------------------------------------------------------------ TransformNet

TransformNet::TransformNet(const ModelConfig& cfg) : embed_("t_z.embed"), mlp_("t_z.mlp") {
  embed_.add<nn::Conv2d>("t_z.proj", cfg.latent_channels, cfg.embed_channels, 1, 1, 0);
  embed_.add<nn::ReLU>();
  embed_.add<nn::AvgPool2d>(cfg.embed_pool);
  mlp_.add<nn::Linear>("t_z.hidden", 2 * cfg.embed_size(), cfg.hidden_size);
  mlp_.add<nn::ReLU>();
  out_ = &mlp_.add<nn::Linear>("t_z.out", cfg.hidden_size, 6);
  out_->weight().init = nn::Param::Init::zeros;
}

Tensor TransformNet::forward(const Tensor& z1, const Tensor& z2, nn::Tape* tape) const {
  require_shape(z2.shape(), z1.shape(), "predict_transform");
  const int b = z1.n();
  const Tensor e = embed_.forward(concat_batch(z1, z2), tape);
  const std::size_t per = e.shape().item();
  Tensor joint(Shape{b, static_cast<int>(2 * per), 1, 1});
  for (int i = 0; i < b; ++i) {
    std::copy_n(e.item(i).data(), per, joint.item(i).data());
    std::copy_n(e.item(b + i).data(), per, joint.item(i).data() + per);
  }
  if (tape != nullptr) tape->push(Tensor(e.shape()));
  return mlp_.forward(joint, tape);
}

std::pair<Tensor, Tensor> TransformNet::backward(const Tensor& dtheta, nn::Tape& tape) {
  const Tensor djoint = mlp_.backward(dtheta, tape);
  Tensor de = tape.pop();  // zeros, embedding shape
  const int b = djoint.n();
  const std::size_t per = de.shape().item();
  for (int i = 0; i < b; ++i) {
    std::copy_n(djoint.item(i).data(), per, de.item(i).data());
    std::copy_n(djoint.item(i).data() + per, per, de.item(b + i).data());
  }
  const Tensor dz = embed_.backward(de, tape);
  return {slice_batch(dz, 0, b), slice_batch(dz, b, b)};
}

void TransformNet::collect(std::vector<nn::Param*>& out) {
  embed_.collect(out);
  mlp_.collect(out);
}

// -------------------------------------------------------------- SceneModel

SceneModel::SceneModel(ModelConfig cfg)
    : cfg_((cfg.validate(), cfg)), f_o_("f_o"), f_b_("f_b"), g_("g"), t_z_(cfg_) {
  build_encoder(f_o_, "f_o", cfg_);
  build_encoder(f_b_, "f_b", cfg_);
  build_renderer(g_, "g", cfg_);
  reset_parameters();
}

void SceneModel::reset_parameters() {
  nn::initialize(parameters(), cfg_.seed);
  // Identity transform bias: (a11, a12, tx, a21, a22, ty) = (1, 0, 0, 0, 1, 0).
  auto& bias = t_z_.output_layer().bias().value;
  bias.fill(0.f);
  bias[0] = 1.f;
  bias[4] = 1.f;
}

void SceneModel::check_frames(const Tensor& x, const char* who) const {
  const Shape want = frame_shape(x.n());
  if (!(x.shape() == want) || x.n() < 1) {
    throw ContractError(std::string(who) + ": expected frames of shape " + want.str() + ", got " + x.shape().str());
  }
}

void SceneModel::check_code(const Tensor& z, const char* who) const {
  const Shape want = code_shape(z.n());
  if (!(z.shape() == want) || z.n() < 1) {
    throw ContractError(std::string(who) + ": expected codes of shape " + want.str() + ", got " + z.shape().str());
  }
}

Tensor SceneModel::encode_object(const Tensor& frames) const {
  check_frames(frames, "encode_object");
  return f_o_(frames);
}

Tensor SceneModel::encode_background(const Tensor& frames) const {
  check_frames(frames, "encode_background");
  return f_b_(frames);
}

Tensor SceneModel::predict_theta(const Tensor& z1, const Tensor& z2) const {
  check_code(z1, "predict_transform");
  check_code(z2, "predict_transform");
  return t_z_.forward(z1, z2, nullptr);
}

std::vector<AffineParams> SceneModel::predict_transform(const Tensor& z1, const Tensor& z2) const {
  return theta_to_affines(predict_theta(z1, z2));
}

Tensor SceneModel::apply_transform(std::span<const AffineParams> transforms, const Tensor& z) {
  return warp::affine_warp(z, transforms);
}

Tensor SceneModel::compose_scene(const Tensor& z_obj, const Tensor& z_bg) {
  Tensor s = z_obj;
  nn::add_inplace(s, z_bg);
  return s;
}

Tensor SceneModel::render(const Tensor& scene) const {
  check_code(scene, "render");
  return g_(scene);
}

PairOutputs SceneModel::forward_pair(const Tensor& x1, const Tensor& x2) const {
  check_frames(x1, "forward_pair");
  require_shape(x2.shape(), x1.shape(), "forward_pair");
  const int b = x1.n();
  const Tensor x12 = concat_batch(x1, x2);
  const Tensor zo = f_o_(x12);
  const Tensor zb = f_b_(x12);
  PairOutputs out;
  out.z_o1 = slice_batch(zo, 0, b);
  out.z_o2 = slice_batch(zo, b, b);
  out.z_b1 = slice_batch(zb, 0, b);
  out.z_b2 = slice_batch(zb, b, b);
  out.theta = t_z_.forward(out.z_o1, out.z_o2, nullptr);
  out.z_o1_warped = apply_transform(out.transforms(), out.z_o1);
  out.x2_hat = g_(compose_scene(out.z_o1_warped, out.z_b1));
  return out;
}

std::vector<AffineParams> PairOutputs::transforms() const { return theta_to_affines(theta); }

Tensor SceneModel::compose_h(const Tensor& x1, const Tensor& x2, const Tensor& x3, const Tensor& x4) const {
  check_frames(x1, "compose_h");
  for (const Tensor* x : {&x2, &x3, &x4}) require_shape(x->shape(), x1.shape(), "compose_h");
  const auto t = predict_transform(encode_object(x1), encode_object(x2));
  return compose_h_with(t, x3, x4);
}

Tensor SceneModel::compose_h_with(std::span<const AffineParams> transforms, const Tensor& x3,
                                  const Tensor& x4) const {
  check_frames(x3, "compose_h");
  require_shape(x4.shape(), x3.shape(), "compose_h");
  const Tensor z = apply_transform(transforms, encode_object(x3));
  return render(compose_scene(z, encode_background(x4)));
}

std::vector<nn::Param*> SceneModel::parameters() {
  std::vector<nn::Param*> out;
  f_o_.collect(out);
  f_b_.collect(out);
  g_.collect(out);
  t_z_.collect(out);
  return out;
}

std::vector<const nn::Param*> SceneModel::parameters() const {
  auto ps = const_cast<SceneModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

SceneModel::ParamGroups SceneModel::parameter_groups() {
  ParamGroups g;
  f_o_.collect(g.object_encoder);
  f_b_.collect(g.background_encoder);
  g_.collect(g.renderer);
  t_z_.collect(g.transform);
  return g;
}

std::vector<AffineParams> theta_to_affines(const Tensor& theta) {
  if (theta.shape().item() != 6) throw ContractError("theta must have 6 coefficients per item");
  std::vector<AffineParams> out;
  out.reserve(theta.n());
  for (int n = 0; n < theta.n(); ++n) {
    const auto v = theta.item(n);
    out.push_back(AffineParams::from_coefficients({v[0], v[1], v[2], v[3], v[4], v[5]}, warp::CoordFrame::normalized));
  }
  return out;
}

Tensor affines_to_theta(std::span<const AffineParams> transforms) {
  const auto c = warp::pack_coefficients<float>(transforms);
  return Tensor(Shape{static_cast<int>(transforms.size()), 6, 1, 1}, c);
}

}  // namespace eqscene::model
