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

#include "projectedex/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace projectedex {

bool Tensor::all_finite() const {
  const float* p = data();
  const std::int64_t n = numel();
  for (std::int64_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

float Tensor::min() const {
  float m = std::numeric_limits<float>::infinity();
  const float* p = data();
  for (std::int64_t i = 0; i < numel(); ++i) m = std::min(m, p[i]);
  return m;
}

float Tensor::max() const {
  float m = -std::numeric_limits<float>::infinity();
  const float* p = data();
  for (std::int64_t i = 0; i < numel(); ++i) m = std::max(m, p[i]);
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  const float* p = data();
  for (std::int64_t i = 0; i < numel(); ++i) s += p[i];
  return s;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ',';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (pa[i] != pb[i]) return false;
  return true;
}

}  // namespace projectedex
