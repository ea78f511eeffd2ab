// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <vector>

#include "lipspeech/kernels.hpp"

namespace lipspeech::kernels {

namespace {

// Register tile: MR rows x NR columns of C held in accumulators.
constexpr Index kMR = 6;
constexpr Index kNR = 16;
// Cache blocks.
constexpr Index kMC = 96;
constexpr Index kKC = 256;
constexpr Index kNC = 2048;

inline double load_a(const GemmShape& s, const double* a, Index i, Index p) {
  return s.trans_a ? a[p * s.m + i] : a[i * s.k + p];
}

inline double load_b(const GemmShape& s, const double* b, Index p, Index j) {
  return s.trans_b ? b[j * s.k + p] : b[p * s.n + j];
}

// Packs op(B)[pc:pc+kc, jc:jc+nc] into NR-wide column slivers, zero padded.
void pack_b(const GemmShape& s, const double* b, Index pc, Index kc, Index jc,
            Index nc, double* out) {
  const Index slivers = (nc + kNR - 1) / kNR;
#pragma omp parallel for schedule(static) if (slivers * kc > 16384)
  for (Index q = 0; q < slivers; ++q) {
    double* dst = out + q * kc * kNR;
    const Index j0 = jc + q * kNR;
    const Index w = std::min(kNR, jc + nc - j0);
    for (Index p = 0; p < kc; ++p) {
      Index j = 0;
      if (!s.trans_b) {
        const double* src = b + (pc + p) * s.n + j0;
        for (; j < w; ++j) dst[p * kNR + j] = src[j];
      } else {
        for (; j < w; ++j) dst[p * kNR + j] = load_b(s, b, pc + p, j0 + j);
      }
      for (; j < kNR; ++j) dst[p * kNR + j] = 0.0;
    }
  }
}

// Packs op(A)[ic:ic+mc, pc:pc+kc] into MR-tall row slivers, zero padded.
void pack_a(const GemmShape& s, const double* a, Index ic, Index mc, Index pc,
            Index kc, double* out) {
  const Index slivers = (mc + kMR - 1) / kMR;
  for (Index q = 0; q < slivers; ++q) {
    double* dst = out + q * kc * kMR;
    const Index i0 = ic + q * kMR;
    const Index h = std::min(kMR, ic + mc - i0);
    for (Index p = 0; p < kc; ++p) {
      Index r = 0;
      for (; r < h; ++r) dst[p * kMR + r] = load_a(s, a, i0 + r, pc + p);
      for (; r < kMR; ++r) dst[p * kMR + r] = 0.0;
    }
  }
}

inline void micro_kernel(Index kc, const double* __restrict ap,
                         const double* __restrict bp, double* __restrict c,
                         Index ldc, Index mr, Index nr, double alpha) {
  double acc[kMR][kNR] = {};
  for (Index p = 0; p < kc; ++p) {
    const double* bv = bp + p * kNR;
    const double* av = ap + p * kMR;
    for (Index r = 0; r < kMR; ++r) {
      const double x = av[r];
#pragma omp simd
      for (Index j = 0; j < kNR; ++j) acc[r][j] += x * bv[j];
    }
  }
  for (Index r = 0; r < mr; ++r)
    for (Index j = 0; j < nr; ++j) c[r * ldc + j] += alpha * acc[r][j];
}

}  // namespace

void gemm(const GemmShape& s, double alpha, const double* a, const double* b,
          double beta, double* c) {
  const Index total = s.m * s.n;
  if (beta == 0.0) {
    std::fill(c, c + total, 0.0);
  } else if (beta != 1.0) {
    for (Index i = 0; i < total; ++i) c[i] *= beta;
  }
  if (s.m == 0 || s.n == 0 || s.k == 0 || alpha == 0.0) return;

  // Matrix-vector products: packing would dominate.
  if (s.m == 1 && !s.trans_b) {
    for (Index p = 0; p < s.k; ++p) {
      const double av = alpha * load_a(s, a, 0, p);
      const double* brow = b + p * s.n;
#pragma omp simd
      for (Index j = 0; j < s.n; ++j) c[j] += av * brow[j];
    }
    return;
  }

  // Packing overwrites every element it later reads, so skip zero-initialization.
  const Index kc_max = std::min(kKC, s.k);
  auto bpack = std::make_unique_for_overwrite<double[]>(
      static_cast<std::size_t>(kc_max * ((std::min(kNC, s.n) + kNR - 1) / kNR) * kNR));
  const Index apack_size = kc_max * ((std::min(kMC, s.m) + kMR - 1) / kMR) * kMR;
  for (Index jc = 0; jc < s.n; jc += kNC) {
    const Index nc = std::min(kNC, s.n - jc);
    for (Index pc = 0; pc < s.k; pc += kKC) {
      const Index kc = std::min(kKC, s.k - pc);
      pack_b(s, b, pc, kc, jc, nc, bpack.get());
      const Index mblocks = (s.m + kMC - 1) / kMC;
      const Index nslivers = (nc + kNR - 1) / kNR;
#pragma omp parallel if (mblocks > 1)
      {
        auto apack = std::make_unique_for_overwrite<double[]>(static_cast<std::size_t>(apack_size));
#pragma omp for schedule(dynamic)
        for (Index mb = 0; mb < mblocks; ++mb) {
          const Index ic = mb * kMC;
          const Index mc = std::min(kMC, s.m - ic);
          pack_a(s, a, ic, mc, pc, kc, apack.get());
          for (Index q = 0; q < nslivers; ++q) {
            const Index j0 = q * kNR;
            const Index nr = std::min(kNR, nc - j0);
            for (Index ir = 0; ir < mc; ir += kMR) {
              const Index mr = std::min(kMR, mc - ir);
              micro_kernel(kc, apack.get() + (ir / kMR) * kc * kMR,
                           bpack.get() + q * kc * kNR,
                           c + (ic + ir) * s.n + jc + j0, s.n, mr, nr, alpha);
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// conv1d: im2col per (batch, group) followed by GEMM.

namespace {

// col[(ci * K + k) * lout + t] = x[ci, t*stride + k*dilation - padding]
void im2col_1d(const Conv1dGeom& g, const double* x, Index cin_g, double* col) {
  const Index lout = g.out_len();
  const Index rows = cin_g * g.kernel;
#pragma omp parallel for schedule(static) if (rows * lout > 32768)
  for (Index r = 0; r < rows; ++r) {
    const Index ci = r / g.kernel, k = r % g.kernel;
    const double* src = x + ci * g.in_len;
    double* dst = col + r * lout;
    const Index off = k * g.dilation - g.padding;
    for (Index t = 0; t < lout; ++t) {
      const Index ix = t * g.stride + off;
      dst[t] = (ix >= 0 && ix < g.in_len) ? src[ix] : 0.0;
    }
  }
}

void col2im_1d(const Conv1dGeom& g, const double* col, Index cin_g, double* gx) {
  const Index lout = g.out_len();
#pragma omp parallel for schedule(static) if (cin_g * g.kernel * lout > 32768)
  for (Index ci = 0; ci < cin_g; ++ci) {
    double* dst = gx + ci * g.in_len;
    for (Index k = 0; k < g.kernel; ++k) {
      const double* src = col + (ci * g.kernel + k) * lout;
      const Index off = k * g.dilation - g.padding;
      for (Index t = 0; t < lout; ++t) {
        const Index ix = t * g.stride + off;
        if (ix >= 0 && ix < g.in_len) dst[ix] += src[t];
      }
    }
  }
}

bool is_pointwise(const Conv1dGeom& g) {
  return g.kernel == 1 && g.stride == 1 && g.padding == 0;
}

}  // namespace

void conv1d_forward(const Conv1dGeom& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  const Index rows = cin_g * g.kernel;
  std::vector<double> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(rows * lout));
  for (Index b = 0; b < g.batch; ++b) {
    for (Index grp = 0; grp < g.groups; ++grp) {
      const double* xg = x + (b * g.in_ch + grp * cin_g) * g.in_len;
      const double* src = xg;
      if (!is_pointwise(g)) {
        im2col_1d(g, xg, cin_g, col.data());
        src = col.data();
      }
      double* yg = y + (b * g.out_ch + grp * cout_g) * lout;
      gemm({cout_g, lout, rows, false, false}, 1.0, w + grp * cout_g * rows, src,
           0.0, yg);
      if (bias) {
        for (Index co = 0; co < cout_g; ++co) {
          const double bv = bias[grp * cout_g + co];
          double* row = yg + co * lout;
          for (Index t = 0; t < lout; ++t) row[t] += bv;
        }
      }
    }
  }
}

void conv1d_backward_input(const Conv1dGeom& g, const double* gy,
                           const double* w, double* gx) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  const Index rows = cin_g * g.kernel;
  std::vector<double> gcol(static_cast<std::size_t>(rows * lout));
  for (Index b = 0; b < g.batch; ++b) {
    for (Index grp = 0; grp < g.groups; ++grp) {
      const double* gyg = gy + (b * g.out_ch + grp * cout_g) * lout;
      double* gxg = gx + (b * g.in_ch + grp * cin_g) * g.in_len;
      if (is_pointwise(g)) {
        gemm({rows, lout, cout_g, true, false}, 1.0, w + grp * cout_g * rows, gyg,
             1.0, gxg);
        continue;
      }
      gemm({rows, lout, cout_g, true, false}, 1.0, w + grp * cout_g * rows, gyg,
           0.0, gcol.data());
      col2im_1d(g, gcol.data(), cin_g, gxg);
    }
  }
}

void conv1d_backward_weight(const Conv1dGeom& g, const double* gy,
                            const double* x, double* gw) {
  const Index lout = g.out_len();
  const Index cin_g = g.in_ch / g.groups;
  const Index cout_g = g.out_ch / g.groups;
  const Index rows = cin_g * g.kernel;
  std::vector<double> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(rows * lout));
  for (Index b = 0; b < g.batch; ++b) {
    for (Index grp = 0; grp < g.groups; ++grp) {
      const double* xg = x + (b * g.in_ch + grp * cin_g) * g.in_len;
      const double* src = xg;
      if (!is_pointwise(g)) {
        im2col_1d(g, xg, cin_g, col.data());
        src = col.data();
      }
      const double* gyg = gy + (b * g.out_ch + grp * cout_g) * lout;
      gemm({cout_g, rows, lout, false, true}, 1.0, gyg, src, 1.0,
           gw + grp * cout_g * rows);
    }
  }
}

// ---------------------------------------------------------------------------
// conv3d: per-output-frame im2row [P x R] followed by GEMM.

namespace {

Index taps(const Conv3dGeom& g) { return g.in_ch * g.kt * g.kh * g.kw; }

void im2row_3d(const Conv3dGeom& g, const double* x, Index t, double* row) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index r = taps(g);
  for (Index y = 0; y < oh; ++y)
    for (Index xo = 0; xo < ow; ++xo) {
      double* dst = row + (y * ow + xo) * r;
      for (Index ci = 0; ci < g.in_ch; ++ci)
        for (Index a = 0; a < g.kt; ++a) {
          const Index it = t * g.st + a - g.pt;
          for (Index b = 0; b < g.kh; ++b) {
            const Index iy = y * g.sh + b - g.ph;
            for (Index c = 0; c < g.kw; ++c) {
              const Index ix = xo * g.sw + c - g.pw;
              const bool inside = it >= 0 && it < g.t && iy >= 0 && iy < g.h &&
                                  ix >= 0 && ix < g.w;
              *dst++ = inside ? x[((it * g.h + iy) * g.w + ix) * g.in_ch + ci] : 0.0;
            }
          }
        }
    }
}

void row2im_3d(const Conv3dGeom& g, const double* row, Index t, double* gx) {
  const Index oh = g.out_h(), ow = g.out_w();
  const Index r = taps(g);
  for (Index y = 0; y < oh; ++y)
    for (Index xo = 0; xo < ow; ++xo) {
      const double* src = row + (y * ow + xo) * r;
      for (Index ci = 0; ci < g.in_ch; ++ci)
        for (Index a = 0; a < g.kt; ++a) {
          const Index it = t * g.st + a - g.pt;
          for (Index b = 0; b < g.kh; ++b) {
            const Index iy = y * g.sh + b - g.ph;
            for (Index c = 0; c < g.kw; ++c, ++src) {
              const Index ix = xo * g.sw + c - g.pw;
              if (it >= 0 && it < g.t && iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                gx[((it * g.h + iy) * g.w + ix) * g.in_ch + ci] += *src;
            }
          }
        }
    }
}

}  // namespace

void conv3d_forward(const Conv3dGeom& g, const double* x, const double* w,
                    const double* bias, double* y) {
  const Index ot = g.out_t();
  const Index p = g.out_h() * g.out_w();
  const Index r = taps(g);
#pragma omp parallel
  {
    std::vector<double> row(static_cast<std::size_t>(p * r));
#pragma omp for schedule(dynamic)
    for (Index t = 0; t < ot; ++t) {
      im2row_3d(g, x, t, row.data());
      double* yt = y + t * p * g.out_ch;
      gemm({p, g.out_ch, r, false, true}, 1.0, row.data(), w, 0.0, yt);
      if (bias)
        for (Index i = 0; i < p; ++i)
          for (Index co = 0; co < g.out_ch; ++co) yt[i * g.out_ch + co] += bias[co];
    }
  }
}

void conv3d_backward_input(const Conv3dGeom& g, const double* gy,
                           const double* w, double* gx) {
  const Index ot = g.out_t();
  const Index p = g.out_h() * g.out_w();
  const Index r = taps(g);
  std::vector<double> row(static_cast<std::size_t>(p * r));
  // Output frames share input frames through the temporal halo, so the
  // scatter stays serial over t; the GEMM inside is parallel.
  for (Index t = 0; t < ot; ++t) {
    gemm({p, r, g.out_ch, false, false}, 1.0, gy + t * p * g.out_ch, w, 0.0,
         row.data());
    row2im_3d(g, row.data(), t, gx);
  }
}

void conv3d_backward_weight(const Conv3dGeom& g, const double* gy,
                            const double* x, double* gw) {
  const Index ot = g.out_t();
  const Index p = g.out_h() * g.out_w();
  const Index r = taps(g);
  const Index wsize = g.out_ch * r;
#pragma omp parallel
  {
    std::vector<double> row(static_cast<std::size_t>(p * r));
    std::vector<double> local(static_cast<std::size_t>(wsize), 0.0);
#pragma omp for schedule(dynamic)
    for (Index t = 0; t < ot; ++t) {
      im2row_3d(g, x, t, row.data());
      gemm({g.out_ch, r, p, true, false}, 1.0, gy + t * p * g.out_ch, row.data(),
           1.0, local.data());
    }
#pragma omp critical
    for (Index i = 0; i < wsize; ++i) gw[i] += local[i];
  }
}

}  // namespace lipspeech::kernels
