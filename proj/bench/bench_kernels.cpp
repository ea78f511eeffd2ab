// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// Parallel kernels vs. the serial reference kernels on model-sized shapes.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "lipspeech/kernels.hpp"

namespace k = lipspeech::kernels;
using k::Index;

namespace {

std::vector<double> random_vec(Index n, std::mt19937_64& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::normal_distribution<double> d;
  for (double& x : v) x = d(rng);
  return v;
}

double time_ms(const std::function<void()>& f, int trials) {
  f();  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < trials; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / trials;
}

void report(const char* name, double flops, double par_ms, double ref_ms) {
  std::printf("%-34s parallel %9.3f ms (%6.2f GFLOP/s)   reference %9.3f ms (%6.2f GFLOP/s)   x%.1f\n",
              name, par_ms, flops / par_ms * 1e-6, ref_ms, flops / ref_ms * 1e-6, ref_ms / par_ms);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::mt19937_64 rng(1);

  const Index gemm_sizes[][3] = {{240, 384, 384}, {240, 1536, 384}, {2304, 32, 375}, {1, 1536, 384}};
  for (auto& s : gemm_sizes) {
    k::GemmShape g{s[0], s[1], s[2], false, false};
    auto a = random_vec(g.m * g.k, rng), b = random_vec(g.k * g.n, rng);
    std::vector<double> c(static_cast<std::size_t>(g.m * g.n));
    const double flops = 2.0 * g.m * g.n * g.k;
    char name[64];
    std::snprintf(name, sizeof name, "gemm %ldx%ldx%ld", g.m, g.n, g.k);
    report(name, flops, time_ms([&] { k::gemm(g, 1.0, a.data(), b.data(), 0.0, c.data()); }, 10),
           time_ms([&] { k::reference::gemm(g, 1.0, a.data(), b.data(), 0.0, c.data()); }, 2));
  }

  struct Conv {
    const char* name;
    k::Conv1dGeom g;
  };
  const Conv convs[] = {
      {"conv1d decoder 384->1536 k9 L240", {1, 384, 1536, 240, 9, 1, 4, 1, 1}},
      {"conv1d resblock 8ch k11 L9600", {1, 8, 8, 9600, 11, 1, 25, 5, 1}},
      {"conv1d msd 64ch k41 s4 g16 L2400", {1, 64, 128, 2400, 41, 4, 20, 1, 16}},
  };
  for (const Conv& c : convs) {
    const auto& g = c.g;
    auto x = random_vec(g.batch * g.in_ch * g.in_len, rng);
    auto w = random_vec(g.out_ch * g.in_ch / g.groups * g.kernel, rng);
    std::vector<double> y(static_cast<std::size_t>(g.batch * g.out_ch * g.out_len()));
    const double flops = 2.0 * g.batch * g.out_ch * g.out_len() * g.in_ch / g.groups * g.kernel;
    report(c.name, flops,
           time_ms([&] { k::conv1d_forward(g, x.data(), w.data(), nullptr, y.data()); }, 5),
           time_ms([&] { k::reference::conv1d_forward(g, x.data(), w.data(), nullptr, y.data()); }, 1));
  }

  k::Conv3dGeom t;
  t.in_ch = 3;
  t.out_ch = 32;
  t.t = 8;
  t.h = t.w = 96;
  t.kt = t.kh = t.kw = 5;
  t.sh = t.sw = 2;
  t.pt = t.ph = t.pw = 2;
  auto x = random_vec(t.t * t.h * t.w * t.in_ch, rng);
  auto w = random_vec(t.out_ch * t.in_ch * 125, rng);
  std::vector<double> y(static_cast<std::size_t>(t.out_t() * t.out_h() * t.out_w() * t.out_ch));
  const double flops = 2.0 * static_cast<double>(y.size()) * t.in_ch * 125;
  report("conv3d tokenizer 8x96x96", flops,
         time_ms([&] { k::conv3d_forward(t, x.data(), w.data(), nullptr, y.data()); }, 3),
         time_ms([&] { k::reference::conv3d_forward(t, x.data(), w.data(), nullptr, y.data()); }, 1));
  return 0;
}
