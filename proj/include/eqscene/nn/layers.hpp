// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal layer library with hand-written backward passes.
//
// forward() is const and may be called concurrently on a frozen model. When a
// Tape is passed, each layer pushes what its backward pass needs; backward()
// pops in reverse order and accumulates parameter gradients into Param::grad.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eqscene/core/rng.hpp"
#include "eqscene/core/tensor.hpp"
#include "eqscene/kernels/conv.hpp"

namespace eqscene::nn {

struct Param {
  enum class Init { uniform, zeros };

  Param() = default;
  Param(std::string name, Shape shape, Init init, float bound = 0.f)
      : name(std::move(name)), value(shape), grad(shape), init(init), bound(bound) {}

  std::string name;
  Tensor value;
  Tensor grad;
  Init init = Init::zeros;
  float bound = 0.f;
};

class Tape {
 public:
  void push(Tensor t) { saved_.push_back(std::move(t)); }
  Tensor pop();
  std::size_t size() const { return saved_.size(); }
  bool empty() const { return saved_.empty(); }
  void clear() { saved_.clear(); }

 private:
  std::vector<Tensor> saved_;
};

class Module {
 public:
  virtual ~Module() = default;

  virtual Tensor forward(const Tensor& x, Tape* tape) const = 0;
  virtual Tensor backward(const Tensor& dy, Tape& tape) = 0;

  virtual void collect(std::vector<Param*>& /*out*/) {}
  virtual std::string describe() const = 0;

  Tensor operator()(const Tensor& x) const { return forward(x, nullptr); }
};

class Conv2d final : public Module {
 public:
  Conv2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad,
         float init_gain = 1.f);

  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;
  std::string describe() const override;

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  kernels::ConvGeometry geometry(const Shape& in) const;

  int in_c_, out_c_, kernel_, stride_, pad_;
  Param weight_;
  Param bias_;
};

/// Transposed convolution; weights are (in_c, out_c, k, k).
class ConvTranspose2d final : public Module {
 public:
  ConvTranspose2d(const std::string& name, int in_c, int out_c, int kernel, int stride, int pad);

  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;
  std::string describe() const override;

 private:
  // The forward convolution this layer transposes, mapping our output to our input.
  kernels::ConvGeometry geometry(const Shape& in) const;

  int in_c_, out_c_, kernel_, stride_, pad_;
  Param weight_;
  Param bias_;
};

/// Fully connected layer over flattened items; output is (N, out, 1, 1).
class Linear final : public Module {
 public:
  Linear(const std::string& name, int in_features, int out_features);

  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;
  std::string describe() const override;

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_, out_;
  Param weight_;
  Param bias_;
};

class ReLU final : public Module {
 public:
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  std::string describe() const override { return "relu"; }
};

class Sigmoid final : public Module {
 public:
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  std::string describe() const override { return "sigmoid"; }
};

/// Non-overlapping average pooling with a square window.
class AvgPool2d final : public Module {
 public:
  explicit AvgPool2d(int window) : window_(window) {}
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  std::string describe() const override { return "avgpool" + std::to_string(window_); }

 private:
  int window_;
};

class Sequential : public Module {
 public:
  Sequential() = default;
  explicit Sequential(std::string name) : name_(std::move(name)) {}

  template <typename M, typename... Args>
  M& add(Args&&... args) {
    auto m = std::make_unique<M>(std::forward<Args>(args)...);
    M& ref = *m;
    layers_.push_back(std::move(m));
    return ref;
  }

  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override;
  std::string describe() const override;

  std::size_t size() const { return layers_.size(); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::vector<std::unique_ptr<Module>> layers_;
};

/// x + body(x).
class Residual final : public Module {
 public:
  explicit Residual(Sequential body) : body_(std::move(body)) {}
  Tensor forward(const Tensor& x, Tape* tape) const override;
  Tensor backward(const Tensor& dy, Tape& tape) override;
  void collect(std::vector<Param*>& out) override { body_.collect(out); }
  std::string describe() const override { return "residual[" + body_.describe() + "]"; }

 private:
  Sequential body_;
};

/// Fills every parameter from a stream keyed by (seed, parameter name).
void initialize(std::vector<Param*> params, std::uint64_t seed);
void zero_grad(const std::vector<Param*>& params);
std::uint64_t fnv1a(std::string_view s);

// Elementwise helpers.
void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, float s);

}  // namespace eqscene::nn
