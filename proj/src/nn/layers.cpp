// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include "eqscene/nn/layers.hpp"

#include <Eigen/Core>
#include <cmath>

namespace eqscene::nn {

namespace {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

// He-uniform bound for a ReLU network.
float he_bound(int fan_in, float gain) { return gain * std::sqrt(6.0f / static_cast<float>(fan_in)); }

void require_channels(const Tensor& x, int c, const std::string& who) {
  if (x.c() != c) {
    throw ContractError(who + ": expected " + std::to_string(c) + " input channels, got shape " +
                        x.shape().str());
  }
}

}  // namespace

Tensor Tape::pop() {
  if (saved_.empty()) throw ContractError("tape underflow: backward called more often than forward");
  Tensor t = std::move(saved_.back());
  saved_.pop_back();
  return t;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void initialize(std::vector<Param*> params, std::uint64_t seed) {
  for (Param* p : params) {
    if (p->init == Param::Init::zeros) {
      p->value.fill(0.f);
    } else {
      Rng rng = Rng::derive(seed, {fnv1a(p->name)});
      for (float& v : p->value.storage()) v = static_cast<float>(rng.uniform(-p->bound, p->bound));
    }
    p->grad.fill(0.f);
  }
}

void zero_grad(const std::vector<Param*>& params) {
  for (Param* p : params) p->grad.fill(0.f);
}

void add_inplace(Tensor& a, const Tensor& b) {
  require_shape(b.shape(), a.shape(), "add_inplace");
  float* pa = a.data();
  const float* pb = b.data();
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for simd
  for (std::ptrdiff_t i = 0; i < n; ++i) pa[i] += pb[i];
}

void scale_inplace(Tensor& a, float s) {
  for (float& v : a.storage()) v *= s;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad, float init_gain)
    : in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", Shape{out_c, in_c, kernel, kernel}, Param::Init::uniform,
              he_bound(in_c * kernel * kernel, init_gain)),
      bias_(name + ".bias", Shape{1, out_c, 1, 1}, Param::Init::zeros) {}

kernels::ConvGeometry Conv2d::geometry(const Shape& in) const {
  return {in_c_, out_c_, kernel_, stride_, pad_, in.h, in.w};
}

Tensor Conv2d::forward(const Tensor& x, Tape* tape) const {
  require_channels(x, in_c_, weight_.name);
  const auto g = geometry(x.shape());
  Tensor y(Shape{x.n(), out_c_, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, x.n(), x.data(), weight_.value.data(), bias_.value.data(), y.data());
  if (tape != nullptr) tape->push(x);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, Tape& tape) {
  const Tensor x = tape.pop();
  const auto g = geometry(x.shape());
  kernels::conv2d_backward_filter(g, x.n(), x.data(), dy.data(), weight_.grad.data(), bias_.grad.data());
  Tensor dx(x.shape());
  kernels::conv2d_backward_data(g, x.n(), dy.data(), weight_.value.data(), dx.data());
  return dx;
}

void Conv2d::collect(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string Conv2d::describe() const {
  return "conv" + std::to_string(kernel_) + "x" + std::to_string(kernel_) + "(" + std::to_string(in_c_) +
         "->" + std::to_string(out_c_) + ",s" + std::to_string(stride_) + ")";
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad)
    : in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_(name + ".weight", Shape{in_c, out_c, kernel, kernel}, Param::Init::uniform,
              he_bound(std::max(1, in_c * kernel * kernel / (stride * stride)), 1.f)),
      bias_(name + ".bias", Shape{1, out_c, 1, 1}, Param::Init::zeros) {}

kernels::ConvGeometry ConvTranspose2d::geometry(const Shape& in) const {
  const int oh = (in.h - 1) * stride_ - 2 * pad_ + kernel_;
  const int ow = (in.w - 1) * stride_ - 2 * pad_ + kernel_;
  return {out_c_, in_c_, kernel_, stride_, pad_, oh, ow};
}

Tensor ConvTranspose2d::forward(const Tensor& x, Tape* tape) const {
  require_channels(x, in_c_, weight_.name);
  const auto g = geometry(x.shape());
  Tensor y(Shape{x.n(), out_c_, g.in_h, g.in_w});
  kernels::conv2d_backward_data(g, x.n(), x.data(), weight_.value.data(), y.data());
  const std::size_t plane = y.shape().plane();
  for (int n = 0; n < y.n(); ++n) {
    for (int c = 0; c < out_c_; ++c) {
      float* p = &y(n, c, 0, 0);
      const float b = bias_.value[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
  if (tape != nullptr) tape->push(x);
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy, Tape& tape) {
  const Tensor x = tape.pop();
  const auto g = geometry(x.shape());
  kernels::conv2d_backward_filter(g, x.n(), dy.data(), x.data(), weight_.grad.data(), nullptr);
  const std::size_t plane = dy.shape().plane();
  for (int n = 0; n < dy.n(); ++n) {
    for (int c = 0; c < out_c_; ++c) {
      const float* p = &dy(n, c, 0, 0);
      float s = 0.f;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      bias_.grad[c] += s;
    }
  }
  Tensor dx(x.shape());
  kernels::conv2d_forward(g, x.n(), dy.data(), weight_.value.data(), nullptr, dx.data());
  return dx;
}

void ConvTranspose2d::collect(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string ConvTranspose2d::describe() const {
  return "convT" + std::to_string(kernel_) + "x" + std::to_string(kernel_) + "(" + std::to_string(in_c_) +
         "->" + std::to_string(out_c_) + ",s" + std::to_string(stride_) + ")";
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", Shape{1, 1, out_features, in_features}, Param::Init::uniform,
              he_bound(in_features, 1.f)),
      bias_(name + ".bias", Shape{1, out_features, 1, 1}, Param::Init::zeros) {}

Tensor Linear::forward(const Tensor& x, Tape* tape) const {
  if (x.shape().item() != static_cast<std::size_t>(in_)) {
    throw ContractError(weight_.name + ": expected " + std::to_string(in_) + " features per item, got " +
                        x.shape().str());
  }
  Tensor y(Shape{x.n(), out_, 1, 1});
  MatMap ym(y.data(), x.n(), out_);
  ym.noalias() = ConstMatMap(x.data(), x.n(), in_) * ConstMatMap(weight_.value.data(), out_, in_).transpose();
  for (int n = 0; n < x.n(); ++n) ym.row(n) += ConstMatMap(bias_.value.data(), 1, out_);
  if (tape != nullptr) tape->push(x);
  return y;
}

Tensor Linear::backward(const Tensor& dy, Tape& tape) {
  const Tensor x = tape.pop();
  const ConstMatMap dym(dy.data(), x.n(), out_);
  const ConstMatMap xm(x.data(), x.n(), in_);
  MatMap(weight_.grad.data(), out_, in_) += dym.transpose() * xm;
  // Plain loop: Eigen's vectorized colwise sum groups rows differently
  // depending on the destination's alignment, which breaks bit-exact reruns.
  for (int o = 0; o < out_; ++o) {
    float s = 0.f;
    for (int n = 0; n < x.n(); ++n) s += dy.data()[static_cast<std::size_t>(n) * out_ + o];
    bias_.grad.data()[o] += s;
  }
  Tensor dx(x.shape());
  MatMap(dx.data(), x.n(), in_).noalias() = dym * ConstMatMap(weight_.value.data(), out_, in_);
  return dx;
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::string Linear::describe() const {
  return "linear(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// ----------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x, Tape* tape) const {
  Tensor y = x;
  float* p = y.data();
  const auto n = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for simd
  for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = p[i] > 0.f ? p[i] : 0.f;
  if (tape != nullptr) tape->push(y);
  return y;
}

Tensor ReLU::backward(const Tensor& dy, Tape& tape) {
  const Tensor y = tape.pop();
  Tensor dx = dy;
  float* d = dx.data();
  const float* py = y.data();
  const auto n = static_cast<std::ptrdiff_t>(dx.size());
#pragma omp parallel for simd
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = py[i] > 0.f ? d[i] : 0.f;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, Tape* tape) const {
  Tensor y = x;
  float* p = y.data();
  const auto n = static_cast<std::ptrdiff_t>(y.size());
#pragma omp parallel for
  for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = 1.f / (1.f + std::exp(-p[i]));
  if (tape != nullptr) tape->push(y);
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy, Tape& tape) {
  const Tensor y = tape.pop();
  Tensor dx = dy;
  float* d = dx.data();
  const float* py = y.data();
  const auto n = static_cast<std::ptrdiff_t>(dx.size());
#pragma omp parallel for simd
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] *= py[i] * (1.f - py[i]);
  return dx;
}

Tensor AvgPool2d::forward(const Tensor& x, Tape* tape) const {
  const Shape s = x.shape();
  if (s.h % window_ != 0 || s.w % window_ != 0) {
    throw ContractError("avgpool: input " + s.str() + " not divisible by window");
  }
  Tensor y(Shape{s.n, s.c, s.h / window_, s.w / window_});
  const float inv = 1.f / static_cast<float>(window_ * window_);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < y.h(); ++oy)
        for (int ox = 0; ox < y.w(); ++ox) {
          float acc = 0.f;
          for (int i = 0; i < window_; ++i)
            for (int j = 0; j < window_; ++j) acc += x(n, c, oy * window_ + i, ox * window_ + j);
          y(n, c, oy, ox) = acc * inv;
        }
  if (tape != nullptr) tape->push(Tensor(s));
  return y;
}

Tensor AvgPool2d::backward(const Tensor& dy, Tape& tape) {
  Tensor dx = tape.pop();  // zero tensor with the input shape
  const float inv = 1.f / static_cast<float>(window_ * window_);
  for (int n = 0; n < dx.n(); ++n)
    for (int c = 0; c < dx.c(); ++c)
      for (int y = 0; y < dx.h(); ++y)
        for (int x = 0; x < dx.w(); ++x) dx(n, c, y, x) = dy(n, c, y / window_, x / window_) * inv;
  return dx;
}

// ------------------------------------------------------------ containers

Tensor Sequential::forward(const Tensor& x, Tape* tape) const {
  Tensor h = x;
  for (const auto& layer : layers_) h = layer->forward(h, tape);
  return h;
}

Tensor Sequential::backward(const Tensor& dy, Tape& tape) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, tape);
  return g;
}

void Sequential::collect(std::vector<Param*>& out) {
  for (auto& layer : layers_) layer->collect(out);
}

std::string Sequential::describe() const {
  std::string s;
  for (const auto& layer : layers_) {
    if (!s.empty()) s += " > ";
    s += layer->describe();
  }
  return s;
}

Tensor Residual::forward(const Tensor& x, Tape* tape) const {
  Tensor y = body_.forward(x, tape);
  add_inplace(y, x);
  return y;
}

Tensor Residual::backward(const Tensor& dy, Tape& tape) {
  Tensor dx = body_.backward(dy, tape);
  add_inplace(dx, dy);
  return dx;
}

}  // namespace eqscene::nn
