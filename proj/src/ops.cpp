// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lipspeech/error.hpp"
#include "lipspeech/kernels.hpp"

namespace lipspeech::ops {

using detail::Node;

namespace {

constexpr Index kParallelThreshold = 1 << 15;

void require(bool ok, const std::string& what) {
  if (!ok) throw InternalError(what);
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape out;
  std::vector<Index> stride_a, stride_b;  // aligned to out, 0 on broadcast axes
  enum class Kind { kSame, kSuffixB, kGeneric } kind = Kind::kGeneric;
};

std::vector<Index> strides_of(const Shape& s) {
  std::vector<Index> st(s.size());
  Index acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

Broadcast broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  const std::size_t r = std::max(a.size(), b.size());
  bc.out.assign(r, 1);
  bc.stride_a.assign(r, 0);
  bc.stride_b.assign(r, 0);
  const auto sa = strides_of(a), sb = strides_of(b);
  for (std::size_t i = 0; i < r; ++i) {
    const Index da = i + a.size() >= r ? a[i + a.size() - r] : 1;
    const Index db = i + b.size() >= r ? b[i + b.size() - r] : 1;
    if (da != db && da != 1 && db != 1)
      throw InternalError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    bc.out[i] = std::max(da, db);
    if (i + a.size() >= r && da != 1) bc.stride_a[i] = sa[i + a.size() - r];
    if (i + b.size() >= r && db != 1) bc.stride_b[i] = sb[i + b.size() - r];
  }
  if (a == b) {
    bc.kind = Broadcast::Kind::kSame;
  } else if (bc.out == a && b.size() <= a.size() &&
             std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size()))) {
    bc.kind = Broadcast::Kind::kSuffixB;
  }
  return bc;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Broadcast& bc, Index na, Index nb, F&& f) {
  const Index n = numel(bc.out);
  if (bc.kind == Broadcast::Kind::kSame) {
    for (Index i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (bc.kind == Broadcast::Kind::kSuffixB) {
    for (Index i = 0; i < n; ++i) f(i, i, i % nb);
    return;
  }
  (void)na;
  const std::size_t r = bc.out.size();
  std::vector<Index> idx(r, 0);
  Index ia = 0, ib = 0;
  for (Index i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += bc.stride_a[d];
      ib += bc.stride_b[d];
      if (idx[d] < bc.out[d]) break;
      ia -= bc.stride_a[d] * bc.out[d];
      ib -= bc.stride_b[d] * bc.out[d];
      idx[d] = 0;
    }
  }
}

template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  Broadcast bc = broadcast(a.shape(), b.shape());
  std::vector<double> out(static_cast<std::size_t>(numel(bc.out)));
  const double* av = a.data().data();
  const double* bv = b.data().data();
  if (bc.kind == Broadcast::Kind::kSame) {
    const Index n = numel(bc.out);
#pragma omp parallel for simd if (n > kParallelThreshold)
    for (Index i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for_each_broadcast(bc, a.numel(), b.numel(),
                       [&](Index o, Index ia, Index ib) { out[o] = f(av[ia], bv[ib]); });
  }
  Shape shape = bc.out;
  const Index na = a.numel(), nb = b.numel();
  return make_result(std::move(shape), std::move(out), {a, b},
                     [bc = std::move(bc), da, db, na, nb](Node& self) {
                       const double* x = self.input_value(0);
                       const double* y = self.input_value(1);
                       const double* g = self.grad.data();
                       double* ga = self.input_grad(0);
                       double* gb = self.input_grad(1);
                       for_each_broadcast(bc, na, nb, [&](Index o, Index ia, Index ib) {
                         if (ga) ga[ia] += g[o] * da(x[ia], y[ib]);
                         if (gb) gb[ib] += g[o] * db(x[ia], y[ib]);
                       });
                     });
}

// Elementwise unary op; d(x, y) is dy/dx given input x and output y.
template <class F, class D>
Tensor unary(const Tensor& x, F f, D d) {
  const Index n = x.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  const double* xv = x.data().data();
#pragma omp parallel for simd if (n > kParallelThreshold)
  for (Index i = 0; i < n; ++i) out[i] = f(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [d, n](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    const double* xv = self.input_value(0);
    const double* yv = self.value.data();
    const double* g = self.grad.data();
#pragma omp parallel for simd if (n > kParallelThreshold)
    for (Index i = 0; i < n; ++i) gx[i] += g[i] * d(xv[i], yv[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary(
      x, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor gelu(const Tensor& x) {
  // Exact erf form.
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * v * v) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
        return cdf + v * pdf;
      });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      x, [lo](double v) { return v > lo ? v : lo; },
      [lo](double v, double) { return v > lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  const double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
  const Index n = x.numel();
  return make_result({}, {s}, {x}, [n](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    const double g = self.grad[0];
    for (Index i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  const Index n = x.numel();
  require(n > 0, "mean of empty tensor");
  return mul_scalar(sum(x), 1.0 / static_cast<double>(n));
}

Tensor sum_last(const Tensor& x) {
  const Index inner = x.dim(-1);
  const Index outer = x.numel() / inner;
  Shape shape = x.shape();
  shape.back() = 1;
  std::vector<double> out(static_cast<std::size_t>(outer), 0.0);
  const double* xv = x.data().data();
  for (Index r = 0; r < outer; ++r) {
    double s = 0.0;
    for (Index j = 0; j < inner; ++j) s += xv[r * inner + j];
    out[r] = s;
  }
  return make_result(std::move(shape), std::move(out), {x}, [inner, outer](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (Index r = 0; r < outer; ++r)
      for (Index j = 0; j < inner; ++j) gx[r * inner + j] += self.grad[r];
  });
}

// ---------------------------------------------------------------------------
// Products and normalization

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b) {
  require(a.rank() >= 2 && b.rank() >= 2, "matmul needs rank >= 2");
  const Index n = a.dim(-2), k = a.dim(-1);
  const Index bk = trans_b ? b.dim(-1) : b.dim(-2);
  const Index m = trans_b ? b.dim(-2) : b.dim(-1);
  require(bk == k, "matmul inner mismatch " + shape_str(a.shape()) + " x " +
                       shape_str(b.shape()));
  const Index batch = a.numel() / (n * k);
  const bool shared = b.rank() == 2;
  require(shared || b.numel() / (bk * m) == batch,
          "matmul batch mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Shape shape = a.shape();
  shape.back() = m;
  std::vector<double> out(static_cast<std::size_t>(batch * n * m));
  const double* av = a.data().data();
  const double* bv = b.data().data();
  if (shared) {
    kernels::gemm({batch * n, m, k, false, trans_b}, 1.0, av, bv, 0.0, out.data());
  } else {
#pragma omp parallel for schedule(dynamic) if (batch > 1)
    for (Index i = 0; i < batch; ++i)
      kernels::gemm({n, m, k, false, trans_b}, 1.0, av + i * n * k, bv + i * k * m, 0.0,
                    out.data() + i * n * m);
  }
  return make_result(std::move(shape), std::move(out), {a, b},
                     [=](Node& self) {
                       const double* av = self.input_value(0);
                       const double* bv = self.input_value(1);
                       const double* g = self.grad.data();
                       double* ga = self.input_grad(0);
                       double* gb = self.input_grad(1);
                       if (shared) {
                         // ga = g * op(b)^T ; gb = a^T g (or g^T a when trans_b)
                         if (ga)
                           kernels::gemm({batch * n, k, m, false, !trans_b}, 1.0, g, bv,
                                         1.0, ga);
                         if (gb) {
                           if (trans_b)
                             kernels::gemm({m, k, batch * n, true, false}, 1.0, g, av,
                                           1.0, gb);
                           else
                             kernels::gemm({k, m, batch * n, true, false}, 1.0, av, g,
                                           1.0, gb);
                         }
                         return;
                       }
#pragma omp parallel for schedule(dynamic) if (batch > 1)
                       for (Index i = 0; i < batch; ++i) {
                         const double* gi = g + i * n * m;
                         if (ga)
                           kernels::gemm({n, k, m, false, !trans_b}, 1.0, gi,
                                         bv + i * k * m, 1.0, ga + i * n * k);
                         if (gb) {
                           if (trans_b)
                             kernels::gemm({m, k, n, true, false}, 1.0, gi, av + i * n * k,
                                           1.0, gb + i * k * m);
                           else
                             kernels::gemm({k, m, n, true, false}, 1.0, av + i * n * k, gi,
                                           1.0, gb + i * k * m);
                         }
                       }
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(w.rank() == 2 && x.dim(-1) == w.dim(0),
          "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const Index in = w.dim(0), outf = w.dim(1);
  const Index rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = outf;
  std::vector<double> out(static_cast<std::size_t>(rows * outf));
  kernels::gemm({rows, outf, in, false, false}, 1.0, x.data().data(), w.data().data(), 0.0,
                out.data());
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.numel() == outf, "linear: bias size");
    const double* bv = bias.data().data();
    for (Index r = 0; r < rows; ++r)
      for (Index j = 0; j < outf; ++j) out[r * outf + j] += bv[j];
  }
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(shape), std::move(out), std::move(inputs),
                     [=](Node& self) {
                       const double* g = self.grad.data();
                       if (double* gx = self.input_grad(0))
                         kernels::gemm({rows, in, outf, false, true}, 1.0, g,
                                       self.input_value(1), 1.0, gx);
                       if (double* gw = self.input_grad(1))
                         kernels::gemm({in, outf, rows, true, false}, 1.0,
                                       self.input_value(0), g, 1.0, gw);
                       if (has_bias)
                         if (double* gb = self.input_grad(2))
                           for (Index r = 0; r < rows; ++r)
                             for (Index j = 0; j < outf; ++j) gb[j] += g[r * outf + j];
                     });
}

Tensor softmax_last(const Tensor& x) {
  const Index inner = x.dim(-1);
  const Index outer = x.numel() / inner;
  std::vector<double> out(static_cast<std::size_t>(x.numel()));
  const double* xv = x.data().data();
#pragma omp parallel for if (outer * inner > kParallelThreshold)
  for (Index r = 0; r < outer; ++r) {
    const double* row = xv + r * inner;
    double* o = out.data() + r * inner;
    double mx = row[0];
#pragma omp simd reduction(max : mx)
    for (Index j = 0; j < inner; ++j) mx = std::max(mx, row[j]);
    for (Index j = 0; j < inner; ++j) o[j] = row[j] - mx;
    kernels::exp_inplace(o, inner);
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (Index j = 0; j < inner; ++j) s += o[j];
    const double inv = 1.0 / s;
    for (Index j = 0; j < inner; ++j) o[j] *= inv;
  }
  return make_result(x.shape(), std::move(out), {x}, [inner, outer](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
#pragma omp parallel for if (outer * inner > kParallelThreshold)
    for (Index r = 0; r < outer; ++r) {
      const double* y = self.value.data() + r * inner;
      const double* g = self.grad.data() + r * inner;
      double dot = 0.0;
      for (Index j = 0; j < inner; ++j) dot += g[j] * y[j];
      for (Index j = 0; j < inner; ++j) gx[r * inner + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm_last(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps) {
  const Index inner = x.dim(-1);
  const Index outer = x.numel() / inner;
  require(gamma.numel() == inner && beta.numel() == inner, "layer_norm: affine size");
  std::vector<double> out(static_cast<std::size_t>(x.numel()));
  // xhat and 1/sigma retained for backward.
  auto xhat = std::make_shared<std::vector<double>>(out.size());
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(outer));
  const double* xv = x.data().data();
  const double* gv = gamma.data().data();
  const double* bv = beta.data().data();
#pragma omp parallel for if (outer * inner > kParallelThreshold)
  for (Index r = 0; r < outer; ++r) {
    const double* row = xv + r * inner;
    double mu = 0.0;
    for (Index j = 0; j < inner; ++j) mu += row[j];
    mu /= static_cast<double>(inner);
    double var = 0.0;
    for (Index j = 0; j < inner; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(inner);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (Index j = 0; j < inner; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * inner + j] = h;
      out[r * inner + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta}, [=](Node& self) {
        const double* g = self.grad.data();
        const double* gam = self.input_value(1);
        double* gx = self.input_grad(0);
        double* ggam = self.input_grad(1);
        double* gbet = self.input_grad(2);
        const double inv_n = 1.0 / static_cast<double>(inner);
        for (Index r = 0; r < outer; ++r) {
          const double* h = xhat->data() + r * inner;
          const double* gr = g + r * inner;
          if (ggam)
            for (Index j = 0; j < inner; ++j) ggam[j] += gr[j] * h[j];
          if (gbet)
            for (Index j = 0; j < inner; ++j) gbet[j] += gr[j];
          if (gx) {
            double m1 = 0.0, m2 = 0.0;
            for (Index j = 0; j < inner; ++j) {
              const double gh = gr[j] * gam[j];
              m1 += gh;
              m2 += gh * h[j];
            }
            m1 *= inv_n;
            m2 *= inv_n;
            const double is = (*inv_std)[r];
            for (Index j = 0; j < inner; ++j)
              gx[r * inner + j] += is * (gr[j] * gam[j] - m1 - h[j] * m2);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& x, Shape shape) {
  Index known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      require(infer < 0, "reshape: more than one -1");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) shape[static_cast<std::size_t>(infer)] = known ? x.numel() / known : 0;
  require(numel(shape) == x.numel(),
          "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  const Index n = x.numel();
  return make_result(std::move(shape), x.values(), {x}, [n](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (Index i = 0; i < n; ++i) gx[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const std::size_t r = x.shape().size();
  require(perm.size() == r, "permute rank mismatch");
  const auto in_strides = strides_of(x.shape());
  Shape shape(r);
  std::vector<Index> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    shape[i] = x.shape()[static_cast<std::size_t>(perm[i])];
    src_stride[i] = in_strides[static_cast<std::size_t>(perm[i])];
  }
  const Index n = x.numel();
  // map[o] = source index of output element o
  auto map = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(n));
  {
    std::vector<Index> idx(r, 0);
    Index src = 0;
    for (Index o = 0; o < n; ++o) {
      (*map)[o] = src;
      for (std::size_t d = r; d-- > 0;) {
        ++idx[d];
        src += src_stride[d];
        if (idx[d] < shape[d]) break;
        src -= src_stride[d] * shape[d];
        idx[d] = 0;
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  const double* xv = x.data().data();
  for (Index o = 0; o < n; ++o) out[o] = xv[(*map)[o]];
  return make_result(std::move(shape), std::move(out), {x}, [map, n](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (Index o = 0; o < n; ++o) gx[(*map)[o]] += self.grad[o];
  });
}

Tensor transpose(const Tensor& x, int a, int b) {
  const int r = x.rank();
  if (a < 0) a += r;
  if (b < 0) b += r;
  std::vector<int> perm(static_cast<std::size_t>(r));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
  return permute(x, perm);
}

namespace {

// (outer, axis, inner) decomposition of a shape around one axis.
struct AxisSplit {
  Index outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit a;
  for (int i = 0; i < axis; ++i) a.outer *= s[static_cast<std::size_t>(i)];
  a.len = s[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

int norm_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  require(axis >= 0 && axis < rank, "axis out of range");
  return axis;
}

}  // namespace

Tensor slice(const Tensor& x, int axis, Index begin, Index end) {
  axis = norm_axis(axis, x.rank());
  const AxisSplit sp = split_axis(x.shape(), axis);
  require(0 <= begin && begin <= end && end <= sp.len,
          "slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
              shape_str(x.shape()));
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = end - begin;
  const Index len = end - begin;
  std::vector<double> out(static_cast<std::size_t>(sp.outer * len * sp.inner));
  const double* xv = x.data().data();
  for (Index o = 0; o < sp.outer; ++o)
    std::copy_n(xv + (o * sp.len + begin) * sp.inner, len * sp.inner,
                out.data() + o * len * sp.inner);
  return make_result(std::move(shape), std::move(out), {x}, [sp, begin, len](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (Index o = 0; o < sp.outer; ++o) {
      double* dst = gx + (o * sp.len + begin) * sp.inner;
      const double* src = self.grad.data() + o * len * sp.inner;
      for (Index i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  require(!parts.empty(), "concat of nothing");
  axis = norm_axis(axis, parts[0].rank());
  Shape shape = parts[0].shape();
  Index total = 0;
  std::vector<Index> lens;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    require(s.size() == shape.size(), "concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      require(static_cast<int>(i) == axis || s[i] == shape[i], "concat shape mismatch");
    lens.push_back(s[static_cast<std::size_t>(axis)]);
    total += lens.back();
  }
  shape[static_cast<std::size_t>(axis)] = total;
  const AxisSplit sp = split_axis(shape, axis);
  std::vector<double> out(static_cast<std::size_t>(numel(shape)));
  Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data().data();
    for (Index o = 0; o < sp.outer; ++o)
      std::copy_n(src + o * lens[k] * sp.inner, lens[k] * sp.inner,
                  out.data() + (o * total + offset) * sp.inner);
    offset += lens[k];
  }
  return make_result(std::move(shape), std::move(out), parts, [sp, lens, total](Node& self) {
    Index offset = 0;
    for (std::size_t k = 0; k < lens.size(); ++k) {
      if (double* gx = self.input_grad(k)) {
        for (Index o = 0; o < sp.outer; ++o) {
          const double* src = self.grad.data() + (o * total + offset) * sp.inner;
          double* dst = gx + o * lens[k] * sp.inner;
          for (Index i = 0; i < lens[k] * sp.inner; ++i) dst[i] += src[i];
        }
      }
      offset += lens[k];
    }
  });
}

Tensor index_select0(const Tensor& x, const std::vector<Index>& rows) {
  const Index n0 = x.dim(0);
  const Index inner = x.numel() / n0;
  Shape shape = x.shape();
  shape[0] = static_cast<Index>(rows.size());
  std::vector<double> out(rows.size() * static_cast<std::size_t>(inner));
  const double* xv = x.data().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < n0, "index_select0: row out of range");
    std::copy_n(xv + rows[i] * inner, inner, out.data() + static_cast<Index>(i) * inner);
  }
  return make_result(std::move(shape), std::move(out), {x}, [rows, inner](Node& self) {
    double* gx = self.input_grad(0);
    if (!gx) return;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double* src = self.grad.data() + static_cast<Index>(i) * inner;
      double* dst = gx + rows[i] * inner;
      for (Index j = 0; j < inner; ++j) dst[j] += src[j];
    }
  });
}

Tensor pad_last(const Tensor& x, Index left, Index right, PadMode mode) {
  const Index len = x.dim(-1);
  const Index outer = x.numel() / len;
  const Index out_len = len + left + right;
  if (mode == PadMode::kReflect)
    require(left < len && right < len, "reflect pad wider than signal");
  // src[j] = input position feeding output position j, or -1 for zero.
  auto src = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out_len));
  for (Index j = 0; j < out_len; ++j) {
    Index p = j - left;
    if (p < 0 || p >= len) {
      if (mode == PadMode::kZero) {
        p = -1;
      } else {
        p = p < 0 ? -p : 2 * (len - 1) - p;
      }
    }
    (*src)[j] = p;
  }
  Shape shape = x.shape();
  shape.back() = out_len;
  std::vector<double> out(static_cast<std::size_t>(outer * out_len), 0.0);
  const double* xv = x.data().data();
  for (Index r = 0; r < outer; ++r)
    for (Index j = 0; j < out_len; ++j)
      if ((*src)[j] >= 0) out[r * out_len + j] = xv[r * len + (*src)[j]];
  return make_result(std::move(shape), std::move(out), {x},
                     [src, outer, len, out_len](Node& self) {
                       double* gx = self.input_grad(0);
                       if (!gx) return;
                       for (Index r = 0; r < outer; ++r)
                         for (Index j = 0; j < out_len; ++j)
                           if ((*src)[j] >= 0)
                             gx[r * len + (*src)[j]] += self.grad[r * out_len + j];
                     });
}

}  // namespace lipspeech::ops
