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

#include "projectedex/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

#include "projectedex/ops.hpp"

namespace projectedex::ad {

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  n->op = "const";
  return n;
}

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = "leaf";
  return n;
}

Var detach(const Var& x) { return constant(x->value); }

namespace {

// Iterative post-order over the differentiable subgraph.
std::vector<const Node*> topo_order(const Node* root) {
  std::vector<const Node*> order;
  std::unordered_set<const Node*> done;
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      const Node* p = node->parents[idx++].get();
      if (p && p->requires_grad && !done.count(p)) stack.emplace_back(p, 0);
    } else {
      if (done.insert(node).second) order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

GradMap grad(const Var& output, const Var& seed) {
  if (!output->requires_grad)
    throw std::invalid_argument("ad::grad: output does not require gradients");
  GradMap gmap;
  gmap[output.get()] =
      seed ? seed : constant(Tensor::ones(output->value.shape()));

  std::vector<const Node*> order = topo_order(output.get());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto found = gmap.find(node);
    if (found == gmap.end() || !node->vjp) continue;
    std::vector<Var> contrib = node->vjp(found->second);
    if (contrib.size() != node->parents.size())
      throw std::logic_error("ad::grad: vjp arity mismatch");
    for (std::size_t i = 0; i < contrib.size(); ++i) {
      if (!contrib[i]) continue;
      const Node* parent = node->parents[i].get();
      if (!parent->requires_grad) continue;
      auto slot = gmap.find(parent);
      if (slot == gmap.end())
        gmap[parent] = contrib[i];
      else
        slot->second = add(slot->second, contrib[i]);
    }
  }
  return gmap;
}

Var grad_of(const Var& output, const Var& wrt, const Var& seed) {
  GradMap g = grad(output, seed);
  auto it = g.find(wrt.get());
  if (it == g.end()) return constant(Tensor::zeros(wrt->value.shape()));
  return it->second;
}

}  // namespace projectedex::ad
