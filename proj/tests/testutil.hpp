// Shared helpers for the test suites.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "projectedex/autodiff.hpp"
#include "projectedex/ops.hpp"
#include "projectedex/rng.hpp"

namespace testutil {

using projectedex::Rng;
using projectedex::Tensor;
namespace ad = projectedex::ad;

// Scalar-valued graph builder over a fixed set of leaf inputs.
using ScalarFn = std::function<ad::Var(const std::vector<ad::Var>&)>;

// Central finite differences of f w.r.t. inputs[which], elementwise.
inline Tensor finite_diff(const ScalarFn& f, std::vector<Tensor> inputs,
                          std::size_t which, double h) {
  Tensor g(inputs[which].shape());
  for (std::int64_t i = 0; i < inputs[which].numel(); ++i) {
    const float orig = inputs[which][i];
    auto eval = [&](double x) {
      inputs[which][i] = static_cast<float>(x);
      std::vector<ad::Var> vars;
      for (const auto& t : inputs) vars.push_back(ad::leaf(t.clone(), false));
      vars[which]->requires_grad = true;  // graph still built eagerly
      return static_cast<double>(f(vars)->value[0]);
    };
    const double fp = eval(orig + h);
    const double fm = eval(orig - h);
    inputs[which][i] = orig;
    g[i] = static_cast<float>((fp - fm) / (2.0 * h));
  }
  return g;
}

// L2 relative error between the autodiff gradient and central differences,
// maximized over the chosen inputs.
inline double grad_rel_error(const ScalarFn& f,
                             const std::vector<Tensor>& inputs,
                             double h = 3e-3) {
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(ad::leaf(t.clone(), true));
  ad::Var out = f(vars);
  ad::GradMap grads = ad::grad(out);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor fd = finite_diff(f, inputs, k, h);
    auto it = grads.find(vars[k].get());
    Tensor ag = it != grads.end() ? it->second->value
                                  : Tensor::zeros(inputs[k].shape());
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < fd.numel(); ++i) {
      const double d = static_cast<double>(ag[i]) - static_cast<double>(fd[i]);
      num += d * d;
      den += static_cast<double>(fd[i]) * fd[i];
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-8));
  }
  return worst;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng,
                            float scale = 1.0f) {
  return Tensor::randn(std::move(shape), rng, scale);
}

}  // namespace testutil
