// Copyright 2026 The STP Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include <cblas.h>

namespace stp::ad {

// ---- tape ------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::param(const Tensor& value, bool requires_grad) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::detach(Var v) {
  Node n;
  n.value = value(v);
  n.detached = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  return record(std::move(value),
                std::span<const Var>(parents.begin(), parents.size()),
                std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (nodes_.at(p.id).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed ? *n.borrowed : n.value;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(value(v).shape(), 0.0);
  return n.grad;
}

Tensor& Tape::grad_slot(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad = Tensor(value(v).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var scalar) {
  if (backward_done_) throw std::logic_error("tape: backward called twice");
  backward_done_ = true;
  if (value(scalar).numel() != 1) {
    throw ShapeError("backward: expected a scalar, got shape " +
                     shape_str(value(scalar).shape()));
  }
  if (!nodes_.at(scalar.id).requires_grad) return;
  grad_slot(scalar).fill(1.0);
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

// ---- helpers ---------------------------------------------------------------

namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got shape " +
                     shape_str(x.shape()));
  }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s,
                     std::size_t p, const char* op) {
  if (in + 2 * p < k || s == 0) {
    throw ShapeError(std::string(op) + ": window larger than padded input");
  }
  return (in + 2 * p - k) / s + 1;
}

struct ConvGeom {
  std::size_t batch, cin, h, w, cout, k, ho, wo;
  std::size_t stride, pad;
  std::size_t rows() const { return cin * k * k; }
  std::size_t pix() const { return ho * wo; }
};

// Row-major C[m, n] = op(A) op(B) + beta * C with tight leading dimensions.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double beta, double* c) {
  // One BLAS thread keeps the reduction order fixed.
  static const bool single = (openblas_set_num_threads(1), true);
  (void)single;
  const int M = static_cast<int>(m), N = static_cast<int>(n), K = static_cast<int>(k);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, M, N, K, 1.0, a, trans_a ? M : K, b,
              trans_b ? K : N, beta, c, N);
}

// Output columns [lo, hi) whose input column ow * stride + kw - pad lies in
// [0, w).
std::pair<std::size_t, std::size_t> valid_cols(const ConvGeom& g, std::size_t kw) {
  std::size_t lo = 0;
  while (lo < g.wo && lo * g.stride + kw < g.pad) ++lo;
  std::size_t hi = lo;
  while (hi < g.wo && hi * g.stride + kw < g.pad + g.w) ++hi;
  return {lo, hi};
}

// Columns of sample n live at col[r * ld + n * pix + q].
void im2col(const double* x, const ConvGeom& g, double* col, std::size_t ld) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t kh = 0; kh < g.k; ++kh) {
      for (std::size_t kw = 0; kw < g.k; ++kw) {
        double* dst = col + ((c * g.k + kh) * g.k + kw) * ld;
        const auto [lo, hi] = valid_cols(g, kw);
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          double* row = dst + oh * g.wo;
          const std::size_t ih = oh * g.stride + kh;
          if (ih < g.pad || ih >= g.pad + g.h) {
            std::fill_n(row, g.wo, 0.0);
            continue;
          }
          const double* src = x + (c * g.h + (ih - g.pad)) * g.w + kw - g.pad;
          std::fill_n(row, lo, 0.0);
          for (std::size_t ow = lo; ow < hi; ++ow) row[ow] = src[ow * g.stride];
          std::fill(row + hi, row + g.wo, 0.0);
        }
      }
    }
  }
}

void col2im(const double* col, const ConvGeom& g, double* dx, std::size_t ld) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t kh = 0; kh < g.k; ++kh) {
      for (std::size_t kw = 0; kw < g.k; ++kw) {
        const double* src = col + ((c * g.k + kh) * g.k + kw) * ld;
        const auto [lo, hi] = valid_cols(g, kw);
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const std::size_t ih = oh * g.stride + kh;
          if (ih < g.pad || ih >= g.pad + g.h) continue;
          double* dst = dx + (c * g.h + (ih - g.pad)) * g.w + kw - g.pad;
          const double* row = src + oh * g.wo;
          for (std::size_t ow = lo; ow < hi; ++ow) dst[ow * g.stride] += row[ow];
        }
      }
    }
  }
}

}  // namespace

// ---- dense kernels ---------------------------------------------------------

Var linear(Tape& t, Var x, Var w, std::optional<Var> b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_rank(xv, 2, "linear input");
  require_rank(wv, 2, "linear weight");
  const std::size_t B = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  if (wv.dim(1) != in) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) +
                     " does not match weight " + shape_str(wv.shape()));
  }
  if (b && (t.value(*b).rank() != 1 || t.value(*b).dim(0) != out)) {
    throw ShapeError("linear: bias shape " + shape_str(t.value(*b).shape()));
  }
  Tensor y({B, out});
  for (std::size_t i = 0; i < B; ++i) {
    const double* xr = xv.data() + i * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = wv.data() + o * in;
      double acc = b ? t.value(*b)[o] : 0.0;
      for (std::size_t j = 0; j < in; ++j) acc += xr[j] * wr[j];
      y[i * out + o] = acc;
    }
  }
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  return t.record(std::move(y), parents,
                  [x, w, b, B, in, out](Tape& tp, const Tensor& g) {
                    const Tensor& xv = tp.value(x);
                    const Tensor& wv = tp.value(w);
                    if (tp.requires_grad(x)) {
                      Tensor& dx = tp.grad_slot(x);
                      for (std::size_t i = 0; i < B; ++i) {
                        for (std::size_t o = 0; o < out; ++o) {
                          const double go = g[i * out + o];
                          const double* wr = wv.data() + o * in;
                          double* dr = dx.data() + i * in;
                          for (std::size_t j = 0; j < in; ++j) dr[j] += go * wr[j];
                        }
                      }
                    }
                    if (tp.requires_grad(w)) {
                      Tensor& dw = tp.grad_slot(w);
                      for (std::size_t i = 0; i < B; ++i) {
                        const double* xr = xv.data() + i * in;
                        for (std::size_t o = 0; o < out; ++o) {
                          const double go = g[i * out + o];
                          double* dr = dw.data() + o * in;
                          for (std::size_t j = 0; j < in; ++j) dr[j] += go * xr[j];
                        }
                      }
                    }
                    if (b && tp.requires_grad(*b)) {
                      Tensor& db = tp.grad_slot(*b);
                      for (std::size_t i = 0; i < B; ++i)
                        for (std::size_t o = 0; o < out; ++o) db[o] += g[i * out + o];
                    }
                  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require_rank(av, 2, "matmul lhs");
  require_rank(bv, 2, "matmul rhs");
  const std::size_t M = av.dim(0), K = av.dim(1), N = bv.dim(1);
  if (bv.dim(0) != K) {
    throw ShapeError("matmul: " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  Tensor y({M, N});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const double aik = av[i * K + k];
      for (std::size_t j = 0; j < N; ++j) y[i * N + j] += aik * bv[k * N + j];
    }
  return t.record(std::move(y), {a, b}, [a, b, M, K, N](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.value(a);
    const Tensor& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Tensor& da = tp.grad_slot(a);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < N; ++j) acc += g[i * N + j] * bv[k * N + j];
          da[i * K + k] += acc;
        }
    }
    if (tp.requires_grad(b)) {
      Tensor& db = tp.grad_slot(b);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const double aik = av[i * K + k];
          for (std::size_t j = 0; j < N; ++j) db[k * N + j] += aik * g[i * N + j];
        }
    }
  });
}

Var conv2d(Tape& t, Var x, Var w, std::optional<Var> b, Conv2dParams p) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require_rank(xv, 4, "conv2d input");
  require_rank(wv, 4, "conv2d weight");
  if (wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3)) {
    throw ShapeError("conv2d: input " + shape_str(xv.shape()) +
                     " does not match weight " + shape_str(wv.shape()));
  }
  ConvGeom g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), wv.dim(2),
             0, 0, p.stride, p.padding};
  g.ho = conv_out(g.h, g.k, g.stride, g.pad, "conv2d");
  g.wo = conv_out(g.w, g.k, g.stride, g.pad, "conv2d");
  if (b && (t.value(*b).rank() != 1 || t.value(*b).dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias shape " + shape_str(t.value(*b).shape()));
  }
  const std::size_t R = g.rows(), P = g.pix(), N = g.batch * P;
  const std::size_t in_stride = g.cin * g.h * g.w;
  auto colp = std::make_shared<std::vector<double>>(R * N);
  std::vector<double>& col = *colp;
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(xv.data() + n * in_stride, g, col.data() + n * P, N);
  }
  // [cout, batch * pix] = W [cout, R] * col [R, batch * pix]
  std::vector<double> yt(g.cout * N, 0.0);
  if (b) {
    for (std::size_t o = 0; o < g.cout; ++o)
      std::fill_n(yt.data() + o * N, N, t.value(*b)[o]);
  }
  gemm(false, false, g.cout, N, R, wv.data(), col.data(), b ? 1.0 : 0.0, yt.data());
  Tensor y({g.batch, g.cout, g.ho, g.wo});
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.cout; ++o) {
      std::copy_n(yt.data() + o * N + n * P, P, y.data() + (n * g.cout + o) * P);
    }
  }
  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  // The columns are kept for the weight gradient.
  return t.record(std::move(y), parents, [x, w, b, g, colp](Tape& tp, const Tensor& gy) {
    const Tensor& wv = tp.value(w);
    const std::size_t R = g.rows(), P = g.pix(), N = g.batch * P;
    const std::size_t in_stride = g.cin * g.h * g.w;
    // gy as [cout, batch * pix].
    std::vector<double> gt(g.cout * N);
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t o = 0; o < g.cout; ++o) {
        std::copy_n(gy.data() + (n * g.cout + o) * P, P, gt.data() + o * N + n * P);
      }
    }
    if (tp.requires_grad(w)) {
      gemm(false, true, g.cout, R, N, gt.data(), colp->data(), 1.0, tp.grad_slot(w).data());
    }
    if (tp.requires_grad(x)) {
      std::vector<double> dcol(R * N);
      gemm(true, false, R, N, g.cout, wv.data(), gt.data(), 0.0, dcol.data());
      Tensor& dx = tp.grad_slot(x);
      for (std::size_t n = 0; n < g.batch; ++n) {
        col2im(dcol.data() + n * P, g, dx.data() + n * in_stride, N);
      }
    }
    if (b && tp.requires_grad(*b)) {
      Tensor& db = tp.grad_slot(*b);
      for (std::size_t o = 0; o < g.cout; ++o) {
        double acc = 0.0;
        for (std::size_t q = 0; q < N; ++q) acc += gt[o * N + q];
        db[o] += acc;
      }
    }
  });
}

Var relu(Tape& t, Var x) {
  Tensor y = t.value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(y), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor& dx = tp.grad_slot(x);
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (xv[i] > 0.0) dx[i] += g[i];
  });
}

Var sigmoid(Tape& t, Var x) {
  Tensor y = t.value(x);
  for (double& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
  std::vector<double> saved(y.values().begin(), y.values().end());
  return t.record(std::move(y), {x}, [x, s = std::move(saved)](Tape& tp, const Tensor& g) {
    Tensor& dx = tp.grad_slot(x);
    for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var add(Tape& t, std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("add: no operands");
  Tensor y = t.value(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = t.value(xs[k]);
    if (v.shape() != y.shape()) {
      throw ShapeError("add: operand shapes " + shape_str(y.shape()) + " and " +
                       shape_str(v.shape()));
    }
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += v[i];
  }
  std::vector<Var> parents(xs.begin(), xs.end());
  return t.record(std::move(y), parents, [parents](Tape& tp, const Tensor& g) {
    for (const Var& p : parents) {
      if (!tp.requires_grad(p)) continue;
      Tensor& d = tp.grad_slot(p);
      for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Var xs[] = {a, b};
  return add(t, std::span<const Var>(xs));
}

Var concat(Tape& t, std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("concat: no operands");
  const Shape& s0 = t.value(xs[0]).shape();
  if (s0.size() < 2) throw ShapeError("concat: rank must be >= 2");
  const std::size_t B = s0[0];
  std::size_t inner = 1;
  for (std::size_t d = 2; d < s0.size(); ++d) inner *= s0[d];
  std::size_t total_c = 0;
  std::vector<std::size_t> chans;
  for (const Var& v : xs) {
    const Shape& s = t.value(v).shape();
    Shape a = s, b = s0;
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    a[1] = b[1] = 0;
    if (a != b) {
      throw ShapeError("concat: incompatible shapes " + shape_str(s0) + " and " +
                       shape_str(s));
    }
    chans.push_back(s[1]);
    total_c += s[1];
  }
  Shape out_shape = s0;
  out_shape[1] = total_c;
  Tensor y(out_shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Tensor& v = t.value(xs[k]);
    for (std::size_t n = 0; n < B; ++n) {
      std::copy_n(v.data() + n * chans[k] * inner, chans[k] * inner,
                  y.data() + (n * total_c + off) * inner);
    }
    off += chans[k];
  }
  std::vector<Var> parents(xs.begin(), xs.end());
  return t.record(std::move(y), parents,
                  [parents, chans, B, inner, total_c](Tape& tp, const Tensor& g) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < parents.size(); ++k) {
                      if (tp.requires_grad(parents[k])) {
                        Tensor& d = tp.grad_slot(parents[k]);
                        for (std::size_t n = 0; n < B; ++n) {
                          const double* src = g.data() + (n * total_c + off) * inner;
                          double* dst = d.data() + n * chans[k] * inner;
                          for (std::size_t i = 0; i < chans[k] * inner; ++i) dst[i] += src[i];
                        }
                      }
                      off += chans[k];
                    }
                  });
}

Var flatten(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  if (xv.rank() < 1) throw ShapeError("flatten: scalar input");
  const std::size_t B = xv.dim(0);
  Tensor y = xv.reshaped({B, B ? xv.numel() / B : 0});
  return t.record(std::move(y), {x}, [x](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(x);
    for (std::size_t i = 0; i < g.numel(); ++i) d[i] += g[i];
  });
}

Var global_avg_pool(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 4, "global_pool");
  const std::size_t B = xv.dim(0), C = xv.dim(1), P = xv.dim(2) * xv.dim(3);
  Tensor y({B, C});
  for (std::size_t i = 0; i < B * C; ++i) {
    double acc = 0.0;
    for (std::size_t q = 0; q < P; ++q) acc += xv[i * P + q];
    y[i] = acc / static_cast<double>(P);
  }
  return t.record(std::move(y), {x}, [x, B, C, P](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(x);
    for (std::size_t i = 0; i < B * C; ++i) {
      const double gi = g[i] / static_cast<double>(P);
      for (std::size_t q = 0; q < P; ++q) d[i * P + q] += gi;
    }
  });
}

Var max_pool2d(Tape& t, Var x, PoolParams p) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 4, "max_pool");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t Ho = conv_out(H, p.kernel, p.stride, p.padding, "max_pool");
  const std::size_t Wo = conv_out(W, p.kernel, p.stride, p.padding, "max_pool");
  Tensor y({B, C, Ho, Wo});
  std::vector<std::size_t> arg(y.numel());
  for (std::size_t bc = 0; bc < B * C; ++bc) {
    for (std::size_t oh = 0; oh < Ho; ++oh) {
      for (std::size_t ow = 0; ow < Wo; ++ow) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = bc * H * W;
        for (std::size_t kh = 0; kh < p.kernel; ++kh) {
          const long ih = static_cast<long>(oh * p.stride + kh) - static_cast<long>(p.padding);
          if (ih < 0 || ih >= static_cast<long>(H)) continue;
          for (std::size_t kw = 0; kw < p.kernel; ++kw) {
            const long iw = static_cast<long>(ow * p.stride + kw) - static_cast<long>(p.padding);
            if (iw < 0 || iw >= static_cast<long>(W)) continue;
            const std::size_t idx = (bc * H + ih) * W + iw;
            if (xv[idx] > best) {
              best = xv[idx];
              best_i = idx;
            }
          }
        }
        const std::size_t o = (bc * Ho + oh) * Wo + ow;
        y[o] = best;
        arg[o] = best_i;
      }
    }
  }
  return t.record(std::move(y), {x}, [x, arg = std::move(arg)](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(x);
    for (std::size_t i = 0; i < g.numel(); ++i) d[arg[i]] += g[i];
  });
}

Var select_channels(Tape& t, Var w, std::size_t out_keep,
                    std::span<const std::size_t> in_index) {
  const Tensor& wv = t.value(w);
  if (wv.rank() < 2) throw ShapeError("select_channels: rank must be >= 2");
  const std::size_t O = wv.dim(0), I = wv.dim(1);
  const std::size_t inner = wv.numel() / (O * I);
  if (out_keep > O) throw ShapeError("select_channels: out_keep exceeds rows");
  for (auto j : in_index)
    if (j >= I) throw ShapeError("select_channels: input index out of range");
  Shape s = wv.shape();
  s[0] = out_keep;
  s[1] = in_index.size();
  Tensor y(s);
  const std::size_t J = in_index.size();
  for (std::size_t o = 0; o < out_keep; ++o)
    for (std::size_t j = 0; j < J; ++j)
      std::copy_n(wv.data() + (o * I + in_index[j]) * inner, inner,
                  y.data() + (o * J + j) * inner);
  std::vector<std::size_t> idx(in_index.begin(), in_index.end());
  return t.record(std::move(y), {w},
                  [w, out_keep, idx = std::move(idx), I, inner](Tape& tp, const Tensor& g) {
                    Tensor& d = tp.grad_slot(w);
                    const std::size_t J = idx.size();
                    for (std::size_t o = 0; o < out_keep; ++o)
                      for (std::size_t j = 0; j < J; ++j) {
                        const double* src = g.data() + (o * J + j) * inner;
                        double* dst = d.data() + (o * I + idx[j]) * inner;
                        for (std::size_t q = 0; q < inner; ++q) dst[q] += src[q];
                      }
                  });
}

Var select_prefix(Tape& t, Var b, std::size_t n) {
  const Tensor& bv = t.value(b);
  require_rank(bv, 1, "select_prefix");
  if (n > bv.dim(0)) throw ShapeError("select_prefix: n exceeds length");
  Tensor y({n}, std::vector<double>(bv.data(), bv.data() + n));
  return t.record(std::move(y), {b}, [b, n](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(b);
    for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
  });
}

Var scale(Tape& t, Var x, double c) {
  Tensor y = t.value(x);
  for (double& v : y.values()) v *= c;
  return t.record(std::move(y), {x}, [x, c](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(x);
    for (std::size_t i = 0; i < g.numel(); ++i) d[i] += c * g[i];
  });
}

Var weighted_sum(Tape& t, std::span<const Var> xs, std::span<const double> c) {
  if (xs.size() != c.size()) throw ShapeError("weighted_sum: length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (t.value(xs[k]).numel() != 1) throw ShapeError("weighted_sum: non-scalar term");
    acc += c[k] * t.value(xs[k])[0];
  }
  std::vector<Var> parents(xs.begin(), xs.end());
  std::vector<double> coef(c.begin(), c.end());
  return t.record(Tensor({}, {acc}), parents, [parents, coef](Tape& tp, const Tensor& g) {
    for (std::size_t k = 0; k < parents.size(); ++k) {
      if (!tp.requires_grad(parents[k])) continue;
      tp.grad_slot(parents[k])[0] += coef[k] * g[0];
    }
  });
}

Var sum(Tape& t, Var x) {
  double acc = 0.0;
  for (double v : t.value(x).values()) acc += v;
  return t.record(Tensor({}, {acc}), {x}, [x](Tape& tp, const Tensor& g) {
    Tensor& d = tp.grad_slot(x);
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[0];
  });
}

// ---- losses ------------------------------------------------------------------

namespace {

// log-softmax of one row, max-subtracted.
void log_softmax_row(const double* z, std::size_t k, double* out) {
  double m = z[0];
  for (std::size_t i = 1; i < k; ++i) m = std::max(m, z[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::exp(z[i] - m);
  const double lse = m + std::log(s);
  for (std::size_t i = 0; i < k; ++i) out[i] = z[i] - lse;
}

constexpr double kZeroNorm = 1e-12;

double row_norm(const double* z, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += z[i] * z[i];
  return std::sqrt(s);
}

// Log of the normalized distribution of one logit row.
void normalized_log_probs_row(const double* z, std::size_t k, double* out) {
  const double n = row_norm(z, k);
  if (n < kZeroNorm) {
    const double lu = -std::log(static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i) out[i] = lu;
    return;
  }
  std::vector<double> u(k);
  for (std::size_t i = 0; i < k; ++i) u[i] = z[i] / n;
  log_softmax_row(u.data(), k, out);
}

void require_logits(const Tensor& z, const char* op) {
  if (z.rank() != 2 || z.dim(1) < 2) {
    throw ShapeError(std::string(op) + ": expected logits [B, K>=2], got " +
                     shape_str(z.shape()));
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  require_logits(logits, "softmax");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < B; ++i) {
    log_softmax_row(logits.data() + i * K, K, p.data() + i * K);
  }
  for (double& v : p.values()) v = std::exp(v);
  return p;
}

Var cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
  const Tensor& z = t.value(logits);
  require_logits(z, "cross_entropy");
  const std::size_t B = z.dim(0), K = z.dim(1);
  if (labels.size() != B) throw ShapeError("cross_entropy: label count != batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                              " outside [0, " + std::to_string(K) + ")");
    }
  }
  std::vector<double> lp(B * K);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    log_softmax_row(z.data() + i * K, K, lp.data() + i * K);
    loss -= lp[i * K + labels[i]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> ys(labels.begin(), labels.end());
  return t.record(Tensor({}, {loss}), {logits},
                  [logits, ys, lp = std::move(lp), B, K](Tape& tp, const Tensor& g) {
                    Tensor& d = tp.grad_slot(logits);
                    const double s = g[0] / static_cast<double>(B);
                    for (std::size_t i = 0; i < B; ++i)
                      for (std::size_t k = 0; k < K; ++k) {
                        const double p = std::exp(lp[i * K + k]);
                        d[i * K + k] += s * (p - (static_cast<int>(k) == ys[i] ? 1.0 : 0.0));
                      }
                  });
}

Tensor normalized_probs(const Tensor& logits) {
  require_logits(logits, "normalized_probs");
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < B; ++i) {
    normalized_log_probs_row(logits.data() + i * K, K, p.data() + i * K);
  }
  for (double& v : p.values()) v = std::exp(v);
  return p;
}

Var normalized_kl(Tape& t, Var teacher_logits, Var student_logits) {
  const Tensor& zt = t.value(teacher_logits);
  const Tensor& zs = t.value(student_logits);
  require_logits(zt, "normalized_kl teacher");
  require_logits(zs, "normalized_kl student");
  if (zt.shape() != zs.shape()) {
    throw ShapeError("normalized_kl: teacher " + shape_str(zt.shape()) +
                     " vs student " + shape_str(zs.shape()));
  }
  const std::size_t B = zt.dim(0), K = zt.dim(1);
  std::vector<double> lpt(B * K), lps(B * K);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    normalized_log_probs_row(zt.data() + i * K, K, lpt.data() + i * K);
    normalized_log_probs_row(zs.data() + i * K, K, lps.data() + i * K);
    for (std::size_t k = 0; k < K; ++k) {
      const double pt = std::exp(lpt[i * K + k]);
      loss += pt * (lpt[i * K + k] - lps[i * K + k]);
    }
  }
  loss /= static_cast<double>(B);
  // Only the student is a parent: the teacher never receives gradient.
  return t.record(
      Tensor({}, {loss}), {student_logits},
      [student_logits, lpt = std::move(lpt), lps = std::move(lps), B, K](
          Tape& tp, const Tensor& g) {
        const Tensor& z = tp.value(student_logits);
        Tensor& d = tp.grad_slot(student_logits);
        const double s = g[0] / static_cast<double>(B);
        std::vector<double> gu(K);
        for (std::size_t i = 0; i < B; ++i) {
          const double* zr = z.data() + i * K;
          const double n = row_norm(zr, K);
          if (n < kZeroNorm) continue;
          // dKL/du = p_s - p_t with u = z / ||z||.
          double dot = 0.0;
          for (std::size_t k = 0; k < K; ++k) {
            gu[k] = s * (std::exp(lps[i * K + k]) - std::exp(lpt[i * K + k]));
            dot += gu[k] * zr[k];
          }
          const double n3 = n * n * n;
          for (std::size_t k = 0; k < K; ++k) {
            d[i * K + k] += gu[k] / n - zr[k] * dot / n3;
          }
        }
      });
}

}  // namespace stp::ad
