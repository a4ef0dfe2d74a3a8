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

#include "projectedex/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace projectedex::nn {

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  return Tensor::randn(std::move(shape), rng, stddev);
}

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride_, int pad_,
               Rng& rng, bool bias)
    : stride(stride_), pad(pad_) {
  w = ad::leaf(he_normal({out_ch, in_ch, kernel, kernel},
                         in_ch * kernel * kernel, rng));
  if (bias) b = ad::leaf(Tensor::zeros({out_ch}));
}

ad::Var Conv2d::forward(const ad::Var& x) const {
  ad::Var y = ad::conv2d(x, w, stride, pad);
  return b ? ad::add_channel_bias(y, b) : y;
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  if (b) out.push_back({prefix + ".b", b});
}

Linear::Linear(int in_dim, int out_dim, Rng& rng, bool bias) {
  w = ad::leaf(he_normal({out_dim, in_dim}, in_dim, rng));
  if (bias) b = ad::leaf(Tensor::zeros({out_dim}));
}

ad::Var Linear::forward(const ad::Var& x) const {
  return ad::linear(x, w, b);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  if (b) out.push_back({prefix + ".b", b});
}

Adam::Adam(ParamList params, float beta1, float beta2, float eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p.var->value.shape()));
    v_.push_back(Tensor::zeros(p.var->value.shape()));
  }
}

void Adam::step(const ad::GradMap& grads, float lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = grads.find(params_[i].var.get());
    if (it == grads.end()) continue;
    const Tensor& g = it->second->value;
    Tensor& p = params_[i].var->value;
    if (!g.same_shape(p))
      throw std::logic_error("Adam: gradient shape mismatch for " +
                             params_[i].name);
    float* pm = m_[i].data();
    float* pv = v_[i].data();
    float* pp = p.data();
    const float* pg = g.data();
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      pm[j] = beta1_ * pm[j] + (1.0f - beta1_) * pg[j];
      pv[j] = beta2_ * pv[j] + (1.0f - beta2_) * pg[j] * pg[j];
      const float mhat = static_cast<float>(pm[j] / bc1);
      const float vhat = static_cast<float>(pv[j] / bc2);
      pp[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

StateDict Adam::state() const {
  StateDict sd;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    sd["adam.m." + params_[i].name] = m_[i];
    sd["adam.v." + params_[i].name] = v_[i];
  }
  sd["adam.t"] = Tensor::scalar(static_cast<float>(t_));
  return sd;
}

void Adam::load_state(const StateDict& s) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto im = s.find("adam.m." + params_[i].name);
    auto iv = s.find("adam.v." + params_[i].name);
    if (im == s.end() || iv == s.end())
      throw std::runtime_error("Adam::load_state: missing moments for " +
                               params_[i].name);
    m_[i] = im->second.clone();
    v_[i] = iv->second.clone();
  }
  auto it = s.find("adam.t");
  if (it == s.end()) throw std::runtime_error("Adam::load_state: missing t");
  t_ = static_cast<int>(it->second[0]);
}

void set_requires_grad(const ParamList& params, bool value) {
  for (const auto& p : params) p.var->requires_grad = value;
}

StateDict to_state_dict(const ParamList& params) {
  StateDict sd;
  for (const auto& p : params) sd[p.name] = p.var->value;
  return sd;
}

void load_from_state_dict(const ParamList& params, const StateDict& sd) {
  for (const auto& p : params) {
    auto it = sd.find(p.name);
    if (it == sd.end())
      throw std::runtime_error("state dict missing parameter " + p.name);
    if (it->second.shape() != p.var->value.shape())
      throw std::runtime_error("state dict shape mismatch for " + p.name);
    p.var->value = it->second.clone();
  }
}

}  // namespace projectedex::nn
