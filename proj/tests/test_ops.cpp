// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

// Finite-difference checks for every differentiable op.

#include <random>

#include "doctest.h"
#include "lipspeech/ops.hpp"
#include "test_util.hpp"

using namespace lipspeech;
using lipspeech::testing::gradient_check;
using lipspeech::testing::random_tensor;

namespace {

// Weighted sum with fixed random weights so every output element matters.
Tensor probe(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(y.shape(), rng);
  return ops::sum(ops::mul(y, w));
}

}  // namespace

TEST_CASE("broadcast binary ops") {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({3, 4, 5}, rng, 1.0, true);
  Tensor b = random_tensor({4, 5}, rng, 1.0, true);
  Tensor c = random_tensor({3, 1, 5}, rng, 1.0, true);
  Tensor d = random_tensor({3, 4, 1}, rng, 1.0, true);
  for (double& v : d.data()) v = 2.0 + std::fabs(v);
  CHECK(gradient_check([&] { return probe(ops::add(a, b)); }, {a, b}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::sub(a, c)); }, {a, c}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::mul(c, d)); }, {c, d}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::div(a, d)); }, {a, d}) < 1e-7);
  Tensor s = ops::add(b, c);
  CHECK(s.shape() == Shape{3, 4, 5});
}

TEST_CASE("unary ops") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({4, 6}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::tanh(x)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::gelu(x)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::leaky_relu(x, 0.1)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::exp(x)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::square(x)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::abs(x)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::log(ops::add_scalar(ops::square(x), 1.0))); },
                       {x}) < 1e-7);
  CHECK(gradient_check([&] { return ops::mean(ops::sum_last(x)); }, {x}) < 1e-7);
}

TEST_CASE("matmul, linear, softmax, layer norm") {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({2, 3, 4}, rng, 1.0, true);
  Tensor w = random_tensor({4, 5}, rng, 1.0, true);
  Tensor bw = random_tensor({2, 4, 5}, rng, 1.0, true);
  Tensor bt = random_tensor({2, 5, 4}, rng, 1.0, true);
  Tensor bias = random_tensor({5}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::matmul(a, w)); }, {a, w}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::matmul(a, bw)); }, {a, bw}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::matmul(a, bt, true)); }, {a, bt}) < 1e-7);
  Tensor wt = random_tensor({5, 4}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::matmul(a, wt, true)); }, {a, wt}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::linear(a, w, bias)); }, {a, w, bias}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::softmax_last(a)); }, {a}) < 1e-7);
  Tensor g = random_tensor({4}, rng, 1.0, true);
  Tensor b = random_tensor({4}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::layer_norm_last(a, g, b)); }, {a, g, b}) <
        1e-6);
}

TEST_CASE("shape ops") {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({2, 3, 4}, rng, 1.0, true);
  Tensor y = random_tensor({2, 2, 4}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::permute(x, {2, 0, 1})); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::reshape(x, {4, -1})); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::slice(x, 1, 1, 3)); }, {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::concat({x, y}, 1)); }, {x, y}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::index_select0(x, {1, 1, 0, 1})); }, {x}) <
        1e-7);
  CHECK(gradient_check([&] { return probe(ops::pad_last(x, 2, 3, ops::PadMode::kReflect)); },
                       {x}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::pad_last(x, 1, 2, ops::PadMode::kZero)); },
                       {x}) < 1e-7);
  Tensor p = ops::permute(x, {2, 0, 1});
  CHECK(p.shape() == Shape{4, 2, 3});
  CHECK(p.data()[1 * 6 + 0 * 3 + 2] == x.data()[0 * 12 + 2 * 4 + 1]);
}

TEST_CASE("reflect padding mirrors without repeating the edge") {
  Tensor x({1, 4}, std::vector<double>{1, 2, 3, 4});
  Tensor y = ops::pad_last(x, 2, 2, ops::PadMode::kReflect);
  const std::vector<double> expect{3, 2, 1, 2, 3, 4, 3, 2};
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == expect);
}

TEST_CASE("convolution ops") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({2, 4, 11}, rng, 1.0, true);
  Tensor w = random_tensor({6, 2, 3}, rng, 1.0, true);
  Tensor b = random_tensor({6}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::conv1d(x, w, b, 2, 2, 2, 2)); }, {x, w, b}) <
        1e-7);
  Tensor wt = random_tensor({4, 3, 5}, rng, 1.0, true);
  Tensor bt = random_tensor({3}, rng, 1.0, true);
  CHECK(ops::conv_transpose1d(x, wt, bt, 3, 1).shape() == Shape{2, 3, 33});
  CHECK(gradient_check([&] { return probe(ops::conv_transpose1d(x, wt, bt, 3, 1)); },
                       {x, wt, bt}) < 1e-7);

  Tensor v = random_tensor({3, 6, 6, 2}, rng, 1.0, true);
  Tensor w3 = random_tensor({3, 2, 3, 3, 3}, rng, 1.0, true);
  Tensor b3 = random_tensor({3}, rng, 1.0, true);
  ops::Conv3dParams p{1, 2, 2, 1, 1, 1};
  CHECK(gradient_check([&] { return probe(ops::conv3d(v, w3, b3, p)); }, {v, w3, b3}) < 1e-7);
  CHECK(gradient_check([&] { return probe(ops::max_pool2d(v, 2)); }, {v}) < 1e-7);
  Tensor dw = random_tensor({2, 3, 3}, rng, 1.0, true);
  Tensor db = random_tensor({2}, rng, 1.0, true);
  CHECK(gradient_check([&] { return probe(ops::depthwise_conv2d(v, dw, db)); }, {v, dw, db}) <
        1e-7);
  CHECK(gradient_check([&] { return probe(ops::avg_pool1d(x, 4, 2, 2)); }, {x}) < 1e-7);
}

TEST_CASE("conv_transpose1d is the adjoint of conv1d") {
  // <conv(x), y> == <x, conv_transpose(y)> for the same weight.
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({1, 3, 20}, rng);
  Tensor w = random_tensor({5, 3, 4}, rng);
  Tensor y0 = ops::conv1d(x, w, Tensor(), 2, 1);
  Tensor y = random_tensor(y0.shape(), rng);
  Tensor xt = ops::conv_transpose1d(y, w, Tensor(), 2, 1);
  REQUIRE(xt.shape() == x.shape());
  double lhs = 0, rhs = 0;
  for (Index i = 0; i < y.numel(); ++i) lhs += y0.data()[i] * y.data()[i];
  for (Index i = 0; i < x.numel(); ++i) rhs += x.data()[i] * xt.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("no-grad mode records nothing") {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({3}, rng, 1.0, true);
  NoGradGuard guard;
  Tensor y = ops::square(x);
  CHECK_FALSE(y.requires_grad());
}
