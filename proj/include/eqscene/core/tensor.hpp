// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eqscene/core/error.hpp"

namespace eqscene {

/// Batch, channel, height, width. All tensors in this project are NCHW.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t item() const { return static_cast<std::size_t>(c) * h * w; }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

/// Dense contiguous NCHW tensor with value semantics.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  BasicTensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.numel()) {
      throw ContractError("tensor data size " + std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Contiguous view of one batch item (c*h*w values).
  std::span<T> item(int n) { return {data_.data() + n * shape_.item(), shape_.item()}; }
  std::span<const T> item(int n) const {
    return {data_.data() + n * shape_.item(), shape_.item()};
  }

  /// Same storage reinterpreted under a shape of equal size.
  BasicTensor reshaped(Shape shape) const& {
    BasicTensor out = *this;
    out.reshape(shape);
    return out;
  }
  BasicTensor reshaped(Shape shape) && {
    reshape(shape);
    return std::move(*this);
  }
  void reshape(Shape shape) {
    if (shape.numel() != data_.size()) {
      throw ContractError("cannot reshape " + shape_.str() + " to " + shape.str());
    }
    shape_ = shape;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const BasicTensor&) const = default;

 private:
  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (!(got == want)) {
    throw ContractError(std::string(what) + ": expected shape " + want.str() + ", got " + got.str());
  }
}

/// Stacks single items (or batches) along n. All inputs must agree on c, h, w.
template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>* const> parts) {
  if (parts.empty()) throw ContractError("concat_batch: no inputs");
  Shape s = parts.front()->shape();
  s.n = 0;
  for (const auto* p : parts) {
    if (p->c() != s.c || p->h() != s.h || p->w() != s.w) {
      throw ContractError("concat_batch: mismatched item shape " + p->shape().str());
    }
    s.n += p->n();
  }
  BasicTensor<T> out(s);
  std::size_t off = 0;
  for (const auto* p : parts) {
    std::copy(p->data(), p->data() + p->size(), out.data() + off);
    off += p->size();
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_batch(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const BasicTensor<T>* parts[] = {&a, &b};
  return concat_batch<T>(std::span<const BasicTensor<T>* const>(parts));
}

/// Items [begin, begin + count) of a batch.
template <typename T>
BasicTensor<T> slice_batch(const BasicTensor<T>& t, int begin, int count) {
  if (begin < 0 || count < 0 || begin + count > t.n()) {
    throw ContractError("slice_batch: range out of bounds for " + t.shape().str());
  }
  Shape s = t.shape();
  s.n = count;
  std::vector<T> v(t.data() + begin * t.shape().item(),
                   t.data() + (begin + count) * t.shape().item());
  return BasicTensor<T>(s, std::move(v));
}

}  // namespace eqscene
