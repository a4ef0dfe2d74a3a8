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

#include "projectedex/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace projectedex::ad {

namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

Var make_node(Tensor value, std::vector<Var> parents, const char* op,
              std::function<std::vector<Var>(const Var&)> vjp) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  n->parents = std::move(parents);
  if (n->requires_grad) n->vjp = std::move(vjp);
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " +
                                b->value.shape_str());
}

void check_ndim(const Var& x, int nd, const char* op) {
  if (x->value.ndim() != nd)
    throw std::invalid_argument(std::string(op) + ": expected " +
                                std::to_string(nd) + "-d tensor, got " +
                                x->value.shape_str());
}

// Elementwise helper: out[i] = f(a[i], b[i]).
template <typename F>
Tensor ew2(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  for (std::int64_t i = 0; i < a.numel(); ++i) po[i] = f(pa[i], pb[i]);
  return out;
}

template <typename F>
Tensor ew1(const Tensor& a, F f) {
  Tensor out(a.shape());
  const float* pa = a.data();
  float* po = out.data();
  for (std::int64_t i = 0; i < a.numel(); ++i) po[i] = f(pa[i]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_node(ew2(a->value, b->value, [](float x, float y) { return x + y; }),
                   {a, b}, "add", [a, b](const Var& g) {
                     std::vector<Var> gs(2);
                     if (a->requires_grad) gs[0] = g;
                     if (b->requires_grad) gs[1] = g;
                     return gs;
                   });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_node(ew2(a->value, b->value, [](float x, float y) { return x - y; }),
                   {a, b}, "sub", [a, b](const Var& g) {
                     std::vector<Var> gs(2);
                     if (a->requires_grad) gs[0] = g;
                     if (b->requires_grad) gs[1] = neg(g);
                     return gs;
                   });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make_node(ew2(a->value, b->value, [](float x, float y) { return x * y; }),
                   {a, b}, "mul", [a, b](const Var& g) {
                     std::vector<Var> gs(2);
                     if (a->requires_grad) gs[0] = mul(g, b);
                     if (b->requires_grad) gs[1] = mul(g, a);
                     return gs;
                   });
}

Var neg(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return -v; }), {x}, "neg",
                   [](const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var add_scalar(const Var& x, float c) {
  return make_node(ew1(x->value, [c](float v) { return v + c; }), {x}, "add_s",
                   [](const Var& g) { return std::vector<Var>{g}; });
}

Var mul_scalar(const Var& x, float c) {
  return make_node(ew1(x->value, [c](float v) { return v * c; }), {x}, "mul_s",
                   [c](const Var& g) {
                     return std::vector<Var>{mul_scalar(g, c)};
                   });
}

Var mul_scalarvar(const Var& x, const Var& s) {
  if (s->value.numel() != 1)
    throw std::invalid_argument("mul_scalarvar: scale must hold one element");
  const float sv = s->value[0];
  return make_node(ew1(x->value, [sv](float v) { return v * sv; }), {x, s},
                   "mul_sv", [x, s](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = mul_scalarvar(g, s);
                     if (s->requires_grad) gs[1] = dot(g, x);
                     return gs;
                   });
}

// ---------------------------------------------------------------------------
// unary
// ---------------------------------------------------------------------------

Var exp_(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return std::exp(v); }), {x},
                   "exp", [x](const Var& g) {
                     return std::vector<Var>{mul(g, exp_(x))};
                   });
}

Var log_(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return std::log(v); }), {x},
                   "log", [x](const Var& g) {
                     return std::vector<Var>{mul(g, reciprocal(x))};
                   });
}

Var sqrt_(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return std::sqrt(v); }), {x},
                   "sqrt", [x](const Var& g) {
                     // d sqrt = 0.5 / sqrt(x)
                     return std::vector<Var>{
                         mul(g, mul_scalar(reciprocal(sqrt_(x)), 0.5f))};
                   });
}

Var reciprocal(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return 1.0f / v; }), {x},
                   "recip", [x](const Var& g) {
                     return std::vector<Var>{
                         neg(mul(g, square(reciprocal(x))))};
                   });
}

Var square(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return v * v; }), {x}, "square",
                   [x](const Var& g) {
                     return std::vector<Var>{mul(g, mul_scalar(x, 2.0f))};
                   });
}

Var abs_(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return std::fabs(v); }), {x},
                   "abs", [x](const Var& g) {
                     // sign(x) as a constant mask; subgradient 0 at 0
                     Tensor mask =
                         ew1(x->value, [](float v) {
                           return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f);
                         });
                     return std::vector<Var>{mul(g, constant(std::move(mask)))};
                   });
}

Var tanh_(const Var& x) {
  return make_node(ew1(x->value, [](float v) { return std::tanh(v); }), {x},
                   "tanh", [x](const Var& g) {
                     Var y = tanh_(x);  // recompute; keeps the x dependence
                     return std::vector<Var>{
                         mul(g, add_scalar(neg(square(y)), 1.0f))};
                   });
}

Var sigmoid_(const Var& x) {
  auto sig = [](float v) {
    return v >= 0.0f ? 1.0f / (1.0f + std::exp(-v))
                     : std::exp(v) / (1.0f + std::exp(v));
  };
  return make_node(ew1(x->value, sig), {x}, "sigmoid", [x](const Var& g) {
    Var y = sigmoid_(x);
    return std::vector<Var>{mul(g, mul(y, add_scalar(neg(y), 1.0f)))};
  });
}

Var softplus_(const Var& x) {
  auto sp = [](float v) {
    // log(1 + e^v), overflow-safe
    return v > 0.0f ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  };
  return make_node(ew1(x->value, sp), {x}, "softplus", [x](const Var& g) {
    return std::vector<Var>{mul(g, sigmoid_(x))};
  });
}

Var leaky_relu(const Var& x, float slope) {
  return make_node(
      ew1(x->value, [slope](float v) { return v > 0.0f ? v : slope * v; }),
      {x}, "lrelu", [x, slope](const Var& g) {
        Tensor mask = ew1(x->value, [slope](float v) {
          return v > 0.0f ? 1.0f : slope;
        });
        return std::vector<Var>{mul(g, constant(std::move(mask)))};
      });
}

// ---------------------------------------------------------------------------
// matrices
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  check_ndim(a, 2, "matmul");
  check_ndim(b, 2, "matmul");
  const int m = a->value.dim(0), k = a->value.dim(1);
  const int k2 = b->value.dim(0), n = b->value.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimensions disagree " +
                                a->value.shape_str() + " x " +
                                b->value.shape_str());
  Tensor out({m, n});
  CMapM A(a->value.data(), m, k);
  CMapM B(b->value.data(), k, n);
  MapM O(out.data(), m, n);
  O.noalias() = A * B;
  return make_node(std::move(out), {a, b}, "matmul", [a, b](const Var& g) {
    std::vector<Var> gs(2);
    if (a->requires_grad) gs[0] = matmul(g, transpose(b));
    if (b->requires_grad) gs[1] = matmul(transpose(a), g);
    return gs;
  });
}

Var transpose(const Var& a) {
  check_ndim(a, 2, "transpose");
  const int m = a->value.dim(0), n = a->value.dim(1);
  Tensor out({n, m});
  CMapM A(a->value.data(), m, n);
  MapM O(out.data(), n, m);
  O = A.transpose();
  return make_node(std::move(out), {a}, "transpose", [](const Var& g) {
    return std::vector<Var>{transpose(g)};
  });
}

// ---------------------------------------------------------------------------
// row/column broadcasts
// ---------------------------------------------------------------------------

Var add_bias_rows(const Var& x, const Var& b) {
  check_ndim(x, 2, "add_bias_rows");
  const int n = x->value.dim(0), d = x->value.dim(1);
  if (b->value.numel() != d)
    throw std::invalid_argument("add_bias_rows: bias length mismatch");
  Tensor out({n, d});
  const float* px = x->value.data();
  const float* pb = b->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[i * d + j] = px[i * d + j] + pb[j];
  return make_node(std::move(out), {x, b}, "add_bias_rows",
                   [x, b](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = g;
                     if (b->requires_grad) gs[1] = sum_over_rows(g);
                     return gs;
                   });
}

Var sum_over_rows(const Var& x) {
  check_ndim(x, 2, "sum_over_rows");
  const int n = x->value.dim(0), d = x->value.dim(1);
  Tensor out({d});
  const float* px = x->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[j] += px[i * d + j];
  return make_node(std::move(out), {x}, "sum_over_rows", [n](const Var& g) {
    return std::vector<Var>{broadcast_rows(g, n)};
  });
}

Var broadcast_rows(const Var& b, int n) {
  const int d = static_cast<int>(b->value.numel());
  Tensor out({n, d});
  const float* pb = b->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[i * d + j] = pb[j];
  return make_node(std::move(out), {b}, "broadcast_rows", [](const Var& g) {
    return std::vector<Var>{sum_over_rows(g)};
  });
}

Var rowwise_sub(const Var& x, const Var& v) {
  check_ndim(x, 2, "rowwise_sub");
  const int n = x->value.dim(0), d = x->value.dim(1);
  if (v->value.numel() != n)
    throw std::invalid_argument("rowwise_sub: vector length mismatch");
  Tensor out({n, d});
  const float* px = x->value.data();
  const float* pv = v->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[i * d + j] = px[i * d + j] - pv[i];
  return make_node(std::move(out), {x, v}, "rowwise_sub",
                   [x, v](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = g;
                     if (v->requires_grad) gs[1] = neg(rowwise_sum(g));
                     return gs;
                   });
}

Var rowwise_mul(const Var& x, const Var& v) {
  check_ndim(x, 2, "rowwise_mul");
  const int n = x->value.dim(0), d = x->value.dim(1);
  if (v->value.numel() != n)
    throw std::invalid_argument("rowwise_mul: vector length mismatch");
  Tensor out({n, d});
  const float* px = x->value.data();
  const float* pv = v->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[i * d + j] = px[i * d + j] * pv[i];
  return make_node(std::move(out), {x, v}, "rowwise_mul",
                   [x, v](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = rowwise_mul(g, v);
                     if (v->requires_grad) gs[1] = rowwise_sum(mul(g, x));
                     return gs;
                   });
}

Var rowwise_sum(const Var& x) {
  check_ndim(x, 2, "rowwise_sum");
  const int n = x->value.dim(0), d = x->value.dim(1);
  Tensor out({n});
  const float* px = x->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += px[i * d + j];
    po[i] = static_cast<float>(s);
  }
  return make_node(std::move(out), {x}, "rowwise_sum", [d](const Var& g) {
    return std::vector<Var>{rowwise_broadcast(g, d)};
  });
}

Var rowwise_broadcast(const Var& v, int d) {
  const int n = static_cast<int>(v->value.numel());
  Tensor out({n, d});
  const float* pv = v->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) po[i * d + j] = pv[i];
  return make_node(std::move(out), {v}, "rowwise_broadcast",
                   [](const Var& g) {
                     return std::vector<Var>{rowwise_sum(g)};
                   });
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  int n, cin, h, w;        // input
  int cout, kh, kw;        // kernel
  int ho, wo;              // output
  int k() const { return cin * kh * kw; }
  int p() const { return ho * wo; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw std::invalid_argument("conv2d: expected 4-d input and kernel");
  ConvDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.cin)
    throw std::invalid_argument("conv2d: channel mismatch, input " +
                                x.shape_str() + " kernel " + w.shape_str());
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.ho <= 0 || d.wo <= 0)
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  return d;
}

// Scatter one sample of x into patch-major columns: cols[k, p].
void im2col(const float* x, const ConvDims& d, int stride, int pad,
            float* cols) {
  const int P = d.p();
  for (int c = 0; c < d.cin; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        float* row = cols + ((c * d.kh + ky) * d.kw + kx) * P;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          const bool y_ok = iy >= 0 && iy < d.h;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * d.wo + ox] =
                (y_ok && ix >= 0 && ix < d.w)
                    ? x[(c * d.h + iy) * d.w + ix]
                    : 0.0f;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulate columns back into the input layout.
void col2im_add(const float* cols, const ConvDims& d, int stride, int pad,
                float* x) {
  const int P = d.p();
  for (int c = 0; c < d.cin; ++c) {
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const float* row = cols + ((c * d.kh + ky) * d.kw + kx) * P;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= d.w) continue;
            x[(c * d.h + iy) * d.w + ix] += row[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

std::vector<float>& conv_scratch() {
  static thread_local std::vector<float> buf;
  return buf;
}

Tensor conv2d_fwd(const Tensor& x, const Tensor& w, int stride, int pad) {
  const ConvDims d = conv_dims(x, w, stride, pad);
  Tensor out({d.n, d.cout, d.ho, d.wo});
  auto& cols = conv_scratch();
  cols.resize(static_cast<std::size_t>(d.k()) * d.p());
  CMapM W(w.data(), d.cout, d.k());
  for (int i = 0; i < d.n; ++i) {
    im2col(x.data() + static_cast<std::int64_t>(i) * d.cin * d.h * d.w, d,
           stride, pad, cols.data());
    CMapM C(cols.data(), d.k(), d.p());
    MapM O(out.data() + static_cast<std::int64_t>(i) * d.cout * d.p(), d.cout,
           d.p());
    O.noalias() = W * C;
  }
  return out;
}

Tensor conv2d_input_grad(const Tensor& dy, const Tensor& w, int stride,
                         int pad, int in_h, int in_w) {
  ConvDims d;
  d.n = dy.dim(0);
  d.cout = w.dim(0);
  d.cin = w.dim(1);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.h = in_h;
  d.w = in_w;
  d.ho = dy.dim(2);
  d.wo = dy.dim(3);
  if (dy.dim(1) != d.cout)
    throw std::invalid_argument("conv2d_bwd_input: channel mismatch");
  Tensor dx({d.n, d.cin, d.h, d.w});
  auto& cols = conv_scratch();
  cols.resize(static_cast<std::size_t>(d.k()) * d.p());
  CMapM W(w.data(), d.cout, d.k());
  for (int i = 0; i < d.n; ++i) {
    CMapM DY(dy.data() + static_cast<std::int64_t>(i) * d.cout * d.p(), d.cout,
             d.p());
    MapM C(cols.data(), d.k(), d.p());
    C.noalias() = W.transpose() * DY;
    col2im_add(cols.data(), d, stride, pad,
               dx.data() + static_cast<std::int64_t>(i) * d.cin * d.h * d.w);
  }
  return dx;
}

Tensor conv2d_weight_grad(const Tensor& dy, const Tensor& x, int stride,
                          int pad, int kh, int kw) {
  ConvDims d;
  d.n = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = dy.dim(1);
  d.kh = kh;
  d.kw = kw;
  d.ho = dy.dim(2);
  d.wo = dy.dim(3);
  Tensor dw({d.cout, d.cin, kh, kw});
  auto& cols = conv_scratch();
  cols.resize(static_cast<std::size_t>(d.k()) * d.p());
  MapM DW(dw.data(), d.cout, d.k());
  for (int i = 0; i < d.n; ++i) {
    im2col(x.data() + static_cast<std::int64_t>(i) * d.cin * d.h * d.w, d,
           stride, pad, cols.data());
    CMapM C(cols.data(), d.k(), d.p());
    CMapM DY(dy.data() + static_cast<std::int64_t>(i) * d.cout * d.p(), d.cout,
             d.p());
    if (i == 0)
      DW.noalias() = DY * C.transpose();
    else
      DW.noalias() += DY * C.transpose();
  }
  return dw;
}

}  // namespace

// The three conv maps are mutually adjoint; each vjp is built from the other
// two, so arbitrarily nested differentiation stays closed.
Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  Tensor out = conv2d_fwd(x->value, w->value, stride, pad);
  const int in_h = x->value.dim(2), in_w = x->value.dim(3);
  const int kh = w->value.dim(2), kw = w->value.dim(3);
  return make_node(std::move(out), {x, w}, "conv2d",
                   [x, w, stride, pad, in_h, in_w, kh, kw](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad)
                       gs[0] = conv2d_bwd_input(g, w, stride, pad, in_h, in_w);
                     if (w->requires_grad)
                       gs[1] = conv2d_bwd_weight(g, x, stride, pad, kh, kw);
                     return gs;
                   });
}

Var conv2d_bwd_input(const Var& dy, const Var& w, int stride, int pad,
                     int in_h, int in_w) {
  Tensor out = conv2d_input_grad(dy->value, w->value, stride, pad, in_h, in_w);
  const int kh = w->value.dim(2), kw = w->value.dim(3);
  return make_node(std::move(out), {dy, w}, "conv2d_bwd_input",
                   [dy, w, stride, pad, kh, kw](const Var& g) {
                     std::vector<Var> gs(2);
                     if (dy->requires_grad) gs[0] = conv2d(g, w, stride, pad);
                     if (w->requires_grad)
                       gs[1] = conv2d_bwd_weight(dy, g, stride, pad, kh, kw);
                     return gs;
                   });
}

Var conv2d_bwd_weight(const Var& dy, const Var& x, int stride, int pad,
                      int kh, int kw) {
  Tensor out = conv2d_weight_grad(dy->value, x->value, stride, pad, kh, kw);
  const int in_h = x->value.dim(2), in_w = x->value.dim(3);
  return make_node(std::move(out), {dy, x}, "conv2d_bwd_weight",
                   [dy, x, stride, pad, in_h, in_w](const Var& g) {
                     std::vector<Var> gs(2);
                     if (dy->requires_grad) gs[0] = conv2d(x, g, stride, pad);
                     if (x->requires_grad)
                       gs[1] = conv2d_bwd_input(dy, g, stride, pad, in_h, in_w);
                     return gs;
                   });
}

Var upsample2x(const Var& x) {
  check_ndim(x, 4, "upsample2x");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  const float* px = x->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    const float* src = px + static_cast<std::int64_t>(nc) * h * w;
    float* dst = po + static_cast<std::int64_t>(nc) * 4 * h * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const float v = src[i * w + j];
        float* row0 = dst + (2 * i) * 2 * w + 2 * j;
        float* row1 = row0 + 2 * w;
        row0[0] = row0[1] = row1[0] = row1[1] = v;
      }
  }
  return make_node(std::move(out), {x}, "upsample2x", [](const Var& g) {
    return std::vector<Var>{sumpool2x(g)};
  });
}

Var sumpool2x(const Var& x) {
  check_ndim(x, 4, "sumpool2x");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  if (h % 2 || w % 2)
    throw std::invalid_argument("sumpool2x: odd spatial size");
  Tensor out({n, c, h / 2, w / 2});
  const float* px = x->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    const float* src = px + static_cast<std::int64_t>(nc) * h * w;
    float* dst = po + static_cast<std::int64_t>(nc) * (h / 2) * (w / 2);
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j) {
        const float* r0 = src + (2 * i) * w + 2 * j;
        const float* r1 = r0 + w;
        dst[i * (w / 2) + j] = r0[0] + r0[1] + r1[0] + r1[1];
      }
  }
  return make_node(std::move(out), {x}, "sumpool2x", [](const Var& g) {
    return std::vector<Var>{upsample2x(g)};
  });
}

Var global_avg_pool(const Var& x) {
  check_ndim(x, 4, "global_avg_pool");
  const int h = x->value.dim(2), w = x->value.dim(3);
  return mul_scalar(sum_hw(x), 1.0f / static_cast<float>(h * w));
}

Var sum_hw(const Var& x) {
  check_ndim(x, 4, "sum_hw");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  Tensor out({n, c});
  const float* px = x->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    double s = 0.0;
    const float* src = px + static_cast<std::int64_t>(nc) * h * w;
    for (int i = 0; i < h * w; ++i) s += src[i];
    po[nc] = static_cast<float>(s);
  }
  return make_node(std::move(out), {x}, "sum_hw", [h, w](const Var& g) {
    return std::vector<Var>{broadcast_hw(g, h, w)};
  });
}

Var broadcast_hw(const Var& v, int h, int w) {
  check_ndim(v, 2, "broadcast_hw");
  const int n = v->value.dim(0), c = v->value.dim(1);
  Tensor out({n, c, h, w});
  const float* pv = v->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    float* dst = po + static_cast<std::int64_t>(nc) * h * w;
    for (int i = 0; i < h * w; ++i) dst[i] = pv[nc];
  }
  return make_node(std::move(out), {v}, "broadcast_hw", [](const Var& g) {
    return std::vector<Var>{sum_hw(g)};
  });
}

Var mul_channels(const Var& x, const Var& s) {
  check_ndim(x, 4, "mul_channels");
  check_ndim(s, 2, "mul_channels");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  if (s->value.dim(0) != n || s->value.dim(1) != c)
    throw std::invalid_argument("mul_channels: scale shape mismatch");
  Tensor out(x->value.shape());
  const float* px = x->value.data();
  const float* ps = s->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    const float sv = ps[nc];
    const float* src = px + static_cast<std::int64_t>(nc) * h * w;
    float* dst = po + static_cast<std::int64_t>(nc) * h * w;
    for (int i = 0; i < h * w; ++i) dst[i] = src[i] * sv;
  }
  return make_node(std::move(out), {x, s}, "mul_channels",
                   [x, s](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = mul_channels(g, s);
                     if (s->requires_grad) gs[1] = sum_hw(mul(g, x));
                     return gs;
                   });
}

Var add_channels(const Var& x, const Var& v) {
  check_ndim(x, 4, "add_channels");
  check_ndim(v, 2, "add_channels");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  if (v->value.dim(0) != n || v->value.dim(1) != c)
    throw std::invalid_argument("add_channels: shape mismatch");
  Tensor out(x->value.shape());
  const float* px = x->value.data();
  const float* pv = v->value.data();
  float* po = out.data();
  for (int nc = 0; nc < n * c; ++nc) {
    const float b = pv[nc];
    const float* src = px + static_cast<std::int64_t>(nc) * h * w;
    float* dst = po + static_cast<std::int64_t>(nc) * h * w;
    for (int i = 0; i < h * w; ++i) dst[i] = src[i] + b;
  }
  return make_node(std::move(out), {x, v}, "add_channels",
                   [x, v](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = g;
                     if (v->requires_grad) gs[1] = sum_hw(g);
                     return gs;
                   });
}

Var add_channel_bias(const Var& x, const Var& b) {
  check_ndim(x, 4, "add_channel_bias");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  if (b->value.numel() != c)
    throw std::invalid_argument("add_channel_bias: bias length mismatch");
  Tensor out(x->value.shape());
  const float* px = x->value.data();
  const float* pb = b->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const float bias = pb[ch];
      const std::int64_t base = (static_cast<std::int64_t>(i) * c + ch) * h * w;
      for (int p = 0; p < h * w; ++p) po[base + p] = px[base + p] + bias;
    }
  return make_node(std::move(out), {x, b}, "add_channel_bias",
                   [x, b](const Var& g) {
                     std::vector<Var> gs(2);
                     if (x->requires_grad) gs[0] = g;
                     if (b->requires_grad) gs[1] = sum_nhw(g);
                     return gs;
                   });
}

Var sum_nhw(const Var& x) {
  check_ndim(x, 4, "sum_nhw");
  const int n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
            w = x->value.dim(3);
  Tensor out({c});
  const float* px = x->value.data();
  float* po = out.data();
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const float* src =
          px + (static_cast<std::int64_t>(i) * c + ch) * h * w;
      for (int p = 0; p < h * w; ++p) s += src[p];
    }
    po[ch] = static_cast<float>(s);
  }
  return make_node(std::move(out), {x}, "sum_nhw", [n, h, w](const Var& g) {
    // expand [C] back to [N,C,H,W]
    return std::vector<Var>{broadcast_hw(broadcast_rows(g, n), h, w)};
  });
}

// ---------------------------------------------------------------------------
// reductions and structure
// ---------------------------------------------------------------------------

Var sum_all(const Var& x) {
  Tensor out({1});
  out[0] = static_cast<float>(x->value.sum());
  std::vector<int> shape = x->value.shape();
  return make_node(std::move(out), {x}, "sum_all",
                   [shape](const Var& g) {
                     return std::vector<Var>{broadcast_full(g, shape)};
                   });
}

Var mean_all(const Var& x) {
  return mul_scalar(sum_all(x), 1.0f / static_cast<float>(x->value.numel()));
}

Var broadcast_full(const Var& s, std::vector<int> shape) {
  if (s->value.numel() != 1)
    throw std::invalid_argument("broadcast_full: source must be scalar");
  Tensor out = Tensor::full(shape, s->value[0]);
  return make_node(std::move(out), {s}, "broadcast_full", [](const Var& g) {
    return std::vector<Var>{sum_all(g)};
  });
}

Var reshape(const Var& x, std::vector<int> shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  std::vector<int> orig = x->value.shape();
  return make_node(std::move(out), {x}, "reshape", [orig](const Var& g) {
    return std::vector<Var>{reshape(g, orig)};
  });
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  const int n = xs[0]->value.dim(0);
  int total = 0;
  for (const auto& x : xs) {
    check_ndim(x, 2, "concat_cols");
    if (x->value.dim(0) != n)
      throw std::invalid_argument("concat_cols: row count mismatch");
    total += x->value.dim(1);
  }
  Tensor out({n, total});
  float* po = out.data();
  int off = 0;
  std::vector<int> widths;
  for (const auto& x : xs) {
    const int d = x->value.dim(1);
    widths.push_back(d);
    const float* px = x->value.data();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) po[i * total + off + j] = px[i * d + j];
    off += d;
  }
  return make_node(std::move(out), xs, "concat_cols",
                   [widths](const Var& g) {
                     std::vector<Var> gs;
                     int start = 0;
                     for (int d : widths) {
                       gs.push_back(slice_cols(g, start, d));
                       start += d;
                     }
                     return gs;
                   });
}

Var slice_cols(const Var& x, int start, int len) {
  check_ndim(x, 2, "slice_cols");
  const int n = x->value.dim(0), d = x->value.dim(1);
  if (start < 0 || len <= 0 || start + len > d)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out({n, len});
  const float* px = x->value.data();
  float* po = out.data();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < len; ++j) po[i * len + j] = px[i * d + start + j];
  return make_node(std::move(out), {x}, "slice_cols",
                   [n, d, start, len](const Var& g) {
                     // pad the slice gradient back to full width
                     std::vector<Var> pieces;
                     if (start > 0)
                       pieces.push_back(constant(Tensor::zeros({n, start})));
                     pieces.push_back(g);
                     if (start + len < d)
                       pieces.push_back(
                           constant(Tensor::zeros({n, d - start - len})));
                     return std::vector<Var>{concat_cols(pieces)};
                   });
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

Var avgpool2x(const Var& x) { return mul_scalar(sumpool2x(x), 0.25f); }

Var dot(const Var& a, const Var& b) {
  check_same_shape(a, b, "dot");
  return sum_all(mul(a, b));
}

Var linear(const Var& x, const Var& w, const Var& b) {
  Var y = matmul(x, transpose(w));
  return b ? add_bias_rows(y, b) : y;
}

Var logsumexp_rows(const Var& x) {
  check_ndim(x, 2, "logsumexp_rows");
  const int n = x->value.dim(0), d = x->value.dim(1);
  // constant max shift for stability; cancels exactly in the math
  Tensor shift({n});
  const float* px = x->value.data();
  for (int i = 0; i < n; ++i) {
    float m = px[i * d];
    for (int j = 1; j < d; ++j) m = std::max(m, px[i * d + j]);
    shift[i] = m;
  }
  Var m = constant(shift);
  Var z = rowwise_sub(x, m);
  return add(log_(rowwise_sum(exp_(z))), m);
}

Var softmax_rows(const Var& x) {
  Var z = rowwise_sub(x, logsumexp_rows(x));
  return exp_(z);
}

}  // namespace projectedex::ad
