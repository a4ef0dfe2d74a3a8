// Copyright 2026 The ProjectedEx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "projectedex/rng.hpp"

namespace projectedex {

// Dense float32 tensor, row-major, with shared storage. Copies are shallow;
// the training code treats tensors as immutable once built, except for
// explicit in-place parameter updates between optimizer steps.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(count(shape_), 0.0f)) {}

  Tensor(std::vector<int> shape, std::vector<float> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(std::move(values))) {
    if (data_->size() != static_cast<std::size_t>(count(shape_)))
      throw std::invalid_argument("Tensor: value count does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = v;
    return t;
  }

  static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0f); }

  static Tensor randn(std::vector<int> shape, Rng& rng, float stddev = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& x : *t.data_) x = static_cast<float>(rng.normal()) * stddev;
    return t;
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }

  std::int64_t numel() const { return count(shape_); }
  bool empty() const { return !data_ || data_->empty(); }

  float* data() { return data_->data(); }
  const float* data() const { return data_->data(); }

  float& operator[](std::int64_t i) { return (*data_)[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }

  // Deep copy.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
  }

  // Same storage, new shape.
  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != numel())
      throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;
  float min() const;
  float max() const;
  double sum() const;  // double accumulation
  double mean() const { return numel() == 0 ? 0.0 : sum() / static_cast<double>(numel()); }

  std::string shape_str() const;

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<float>> data_;
};

// Exact elementwise equality (bitwise apart from NaN, which never compares equal).
bool tensors_equal(const Tensor& a, const Tensor& b);

}  // namespace projectedex
