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

#include <vector>

#include "projectedex/autodiff.hpp"

// Differentiable primitives. Every op here has a vjp expressed in terms of
// other primitives, so gradients of gradients work throughout (the conv
// trinity conv2d / conv2d_bwd_input / conv2d_bwd_weight closes on itself).

namespace projectedex::ad {

// ---- elementwise (matching shapes) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& x);

// ---- scalar constants ----
Var add_scalar(const Var& x, float c);
Var mul_scalar(const Var& x, float c);

// x * s where s is a one-element Var.
Var mul_scalarvar(const Var& x, const Var& s);

// ---- unary ----
Var exp_(const Var& x);
Var log_(const Var& x);
Var sqrt_(const Var& x);
Var reciprocal(const Var& x);
Var square(const Var& x);
Var abs_(const Var& x);
Var tanh_(const Var& x);
Var sigmoid_(const Var& x);
Var softplus_(const Var& x);
Var leaky_relu(const Var& x, float slope);

// ---- matrices ----
Var matmul(const Var& a, const Var& b);      // [m,k] x [k,n]
Var transpose(const Var& a);                 // [m,n] -> [n,m]

// ---- 2-D row/column broadcasts ([N,d] matrices) ----
Var add_bias_rows(const Var& x, const Var& b);   // x[n,:] += b
Var sum_over_rows(const Var& x);                 // [N,d] -> [d]
Var broadcast_rows(const Var& b, int n);         // [d] -> [N,d]
Var rowwise_sub(const Var& x, const Var& v);     // x[n,:] -= v[n]
Var rowwise_mul(const Var& x, const Var& v);     // x[n,:] *= v[n]
Var rowwise_sum(const Var& x);                   // [N,d] -> [N]
Var rowwise_broadcast(const Var& v, int d);      // [N] -> [N,d]

// ---- spatial ([N,C,H,W]) ----
Var conv2d(const Var& x, const Var& w, int stride, int pad);
Var conv2d_bwd_input(const Var& dy, const Var& w, int stride, int pad,
                     int in_h, int in_w);
Var conv2d_bwd_weight(const Var& dy, const Var& x, int stride, int pad,
                      int kh, int kw);
Var upsample2x(const Var& x);                 // nearest neighbour
Var sumpool2x(const Var& x);                  // adjoint of upsample2x
Var global_avg_pool(const Var& x);            // -> [N,C]
Var sum_hw(const Var& x);                     // -> [N,C]
Var broadcast_hw(const Var& v, int h, int w); // [N,C] -> [N,C,H,W]
Var mul_channels(const Var& x, const Var& s); // x[n,c,:,:] *= s[n,c]
Var add_channels(const Var& x, const Var& v); // x[n,c,:,:] += v[n,c]
Var add_channel_bias(const Var& x, const Var& b);  // b is [C]
Var sum_nhw(const Var& x);                    // [N,C,H,W] -> [C]

// ---- reductions / structure ----
Var sum_all(const Var& x);                    // -> [1]
Var mean_all(const Var& x);                   // -> [1]
Var broadcast_full(const Var& s, std::vector<int> shape);  // [1] -> shape
Var reshape(const Var& x, std::vector<int> shape);
Var concat_cols(const std::vector<Var>& xs);  // [N,d_i] -> [N, sum d_i]
Var slice_cols(const Var& x, int start, int len);

// ---- composites (thin sugar over the primitives above) ----
Var avgpool2x(const Var& x);
Var dot(const Var& a, const Var& b);          // flattens, -> [1]
Var linear(const Var& x, const Var& w, const Var& b);  // w is [out,in]
Var logsumexp_rows(const Var& x);             // [N,d] -> [N], max-shifted
Var softmax_rows(const Var& x);               // [N,d] -> [N,d]

}  // namespace projectedex::ad
