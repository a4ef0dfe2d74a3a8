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

#include <map>
#include <string>
#include <vector>

#include "projectedex/ops.hpp"
#include "projectedex/rng.hpp"

namespace projectedex::nn {

struct Param {
  std::string name;
  ad::Var var;
};

using ParamList = std::vector<Param>;
using StateDict = std::map<std::string, Tensor>;  // ordered by name

// He-normal (Kaiming fan-in) initialization: stddev = sqrt(2 / fan_in).
Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng);

struct Conv2d {
  ad::Var w;  // [out, in, kh, kw]
  ad::Var b;  // [out], may be null
  int stride = 1;
  int pad = 0;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
         bool bias = true);
  ad::Var forward(const ad::Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  ad::Var w;  // [out, in]
  ad::Var b;  // [out]

  Linear() = default;
  Linear(int in_dim, int out_dim, Rng& rng, bool bias = true);
  ad::Var forward(const ad::Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

// Classic Adam with bias correction. Updates parameter tensors in place;
// callers own the param order, which fixes the update order.
class Adam {
 public:
  explicit Adam(ParamList params, float beta1 = 0.9f, float beta2 = 0.999f,
                float eps = 1e-8f);

  // Applies one update from the gradient map. Parameters missing from the
  // map are skipped (their moments still decay nothing: untouched).
  void step(const ad::GradMap& grads, float lr);

  int t() const { return t_; }
  StateDict state() const;            // moments + step counter
  void load_state(const StateDict& s);

 private:
  ParamList params_;
  std::vector<Tensor> m_, v_;
  float beta1_, beta2_, eps_;
  int t_ = 0;
};

// Utility for freezing a parameter set (e.g. the classifier during the
// adversarial phase).
void set_requires_grad(const ParamList& params, bool value);

StateDict to_state_dict(const ParamList& params);
void load_from_state_dict(const ParamList& params, const StateDict& sd);

}  // namespace projectedex::nn
