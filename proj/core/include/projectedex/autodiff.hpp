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

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "projectedex/tensor.hpp"

namespace projectedex::ad {

class Node;
using Var = std::shared_ptr<Node>;

// One value in a define-by-run graph. Values are computed eagerly; the vjp
// closure rebuilds gradient contributions *as graph nodes*, so gradients are
// themselves differentiable (needed for the path-length penalty, which
// backpropagates through a backward pass).
//
// vjp closures may capture parent Vars and plain tensors, never the node's
// own Var (that would be a shared_ptr cycle).
class Node {
 public:
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<std::vector<Var>(const Var& upstream)> vjp;
  const char* op = "leaf";
};

// Leaf wrapping a constant (no gradient ever).
Var constant(Tensor value);

// Leaf that participates in differentiation (parameters, probed inputs).
Var leaf(Tensor value, bool requires_grad = true);

// Shape-preserving gradient barrier.
Var detach(const Var& x);

using GradMap = std::unordered_map<const Node*, Var>;

// Reverse-mode gradients of `output` w.r.t. every reachable differentiable
// leaf and intermediate. `seed` defaults to ones (so a scalar output gets the
// usual gradient). Returned map entries are graph nodes; differentiate them
// again for higher-order terms.
GradMap grad(const Var& output, const Var& seed = nullptr);

// Convenience: gradient of `output` w.r.t. one var (zeros if unreachable).
Var grad_of(const Var& output, const Var& wrt, const Var& seed = nullptr);

}  // namespace projectedex::ad
