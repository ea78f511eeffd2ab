// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <random>

#include "doctest.h"
#include "lipspeech/decoder.hpp"
#include "lipspeech/error.hpp"
#include "lipspeech/ops.hpp"
#include "test_util.hpp"

using namespace lipspeech;
using lipspeech::testing::gradient_check;
using lipspeech::testing::max_abs_diff;
using lipspeech::testing::random_tensor;

namespace {

DecoderConfig small(Index d = 16, bool pe = false) {
  DecoderConfig c;
  c.layers = 2;
  c.d_model = d;
  c.heads = 2;
  c.d_ff = 2 * d;
  c.conv_kernels = {3, 1};
  c.positional_encoding = pe;
  return c;
}

Tensor roll_rows(const Tensor& x, Index shift) {
  const Index n = x.dim(0);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = ((i - shift) % n + n) % n;
  return ops::index_select0(x, idx);
}

}  // namespace

TEST_CASE("decoder preserves shape at full width") {
  DecoderConfig cfg;
  Rng rng(1);
  AcousticDecoder dec(cfg, rng);
  std::mt19937_64 trng(2);
  NoGradGuard g;
  Tensor x = random_tensor({240, 384}, trng);
  Tensor y = dec.decode(x);
  CHECK(y.shape() == Shape{240, 384});
  CHECK(dec.aux_mel(y).shape() == Shape{240, 80});
  CHECK_THROWS_AS(dec.decode(random_tensor({10, 100}, trng)), ConfigError);
}

TEST_CASE("zeroed residual branches give the identity") {
  Rng rng(3);
  AcousticDecoder dec(small(), rng);
  for (auto& [name, t] : dec.named_parameters())
    if (name.find("attn.o.") != std::string::npos || name.find("conv2.") != std::string::npos)
      for (double& v : t.data()) v = 0.0;
  std::mt19937_64 trng(4);
  Tensor x = random_tensor({12, 16}, trng);
  CHECK(max_abs_diff(dec.decode(x).values(), x.values()) == 0.0);
}

TEST_CASE("without positional encoding the decoder commutes with time shifts") {
  // Pointwise convolutions make the block exactly equivariant to cyclic shifts.
  DecoderConfig cfg = small();
  cfg.conv_kernels = {1, 1};
  Rng rng(5);
  AcousticDecoder dec(cfg, rng);
  std::mt19937_64 trng(6);
  Tensor x = random_tensor({20, 16}, trng);
  NoGradGuard g;
  for (Index s : {1, 3, 7}) CHECK(max_abs_diff(dec.decode(roll_rows(x, s)).values(), roll_rows(dec.decode(x), s).values()) < 1e-12);
}

TEST_CASE("with a temporal kernel, interior rows shift with the input") {
  // Zero-padded convolutions are shift-equivariant away from the edges; a
  // single block with attention disabled isolates the convolution path.
  DecoderConfig cfg = small();
  cfg.layers = 1;
  cfg.conv_kernels = {9, 1};
  Rng rng(7);
  AcousticDecoder dec(cfg, rng);
  for (auto& [name, t] : dec.named_parameters())
    if (name.find("attn.o.") != std::string::npos)
      for (double& v : t.data()) v = 0.0;
  std::mt19937_64 trng(8);
  Tensor x = random_tensor({40, 16}, trng);
  NoGradGuard g;
  const Index s = 5;
  Tensor a = dec.decode(x), b = dec.decode(roll_rows(x, s));
  for (Index i = s + 4; i < 36; ++i)
    CHECK(max_abs_diff(ops::slice(b, 0, i, i + 1).values(), ops::slice(a, 0, i - s, i - s + 1).values()) < 1e-12);
}

TEST_CASE("every output row sees every input row") {
  Rng rng(9);
  AcousticDecoder dec(small(16, true), rng);
  std::mt19937_64 trng(10);
  Tensor x = random_tensor({10, 16}, trng);
  NoGradGuard g;
  Tensor base = dec.decode(x);
  Tensor y = x.detach();
  const Index j = 6;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Index c = 0; c < 16; ++c) y.data()[j * 16 + c] += n01(trng);
  Tensor pert = dec.decode(y);
  for (Index r = 0; r < 10; ++r)
    CHECK(max_abs_diff(ops::slice(base, 0, r, r + 1).values(), ops::slice(pert, 0, r, r + 1).values()) > 1e-8);
}

TEST_CASE("auxiliary mel head is a linear projection") {
  Rng rng(11);
  DecoderConfig cfg = small(16);
  AcousticDecoder dec(cfg, rng);
  std::mt19937_64 trng(12);
  Tensor w = random_tensor({16, 80}, trng);
  dec.mel_head().weight().values() = w.values();
  for (double& b : dec.mel_head().bias().data()) b = 0.0;
  CHECK(max_abs_diff(dec.aux_mel(Tensor({5, 16})).values(), Tensor({5, 80}).values()) == 0.0);
  Tensor x = random_tensor({7, 16}, trng);
  Tensor y = dec.aux_mel(x);
  for (Index i = 0; i < 7; ++i)
    for (Index o = 0; o < 80; ++o) {
      double acc = 0.0;
      for (Index c = 0; c < 16; ++c) acc += x.values()[i * 16 + c] * w.values()[c * 80 + o];
      CHECK(std::abs(y.values()[i * 80 + o] - acc) < 1e-6);
    }
}

TEST_CASE("decoder gradients match finite differences") {
  DecoderConfig cfg = small(8, true);
  cfg.conv_kernels = {3, 3};
  Rng rng(13);
  AcousticDecoder dec(cfg, rng);
  std::mt19937_64 trng(14);
  Tensor x = random_tensor({4, 8}, trng, 1.0, true);
  Tensor probe = random_tensor({4, 80}, trng);
  std::vector<Tensor> inputs{x};
  for (auto& [name, t] : dec.named_parameters())
    if (name == "blocks.0.conv1.weight" || name == "blocks.1.attn.q.weight" || name == "blocks.0.norm2.weight" ||
        name == "mel_head.weight")
      inputs.push_back(t);
  REQUIRE(inputs.size() == 5);
  CHECK(gradient_check([&] { return ops::sum(ops::mul(dec.aux_mel(dec.decode(x)), probe)); }, inputs) < 1e-4);
}

TEST_CASE("decoder configuration errors") {
  DecoderConfig c;
  c.conv_kernels = {8, 1};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = DecoderConfig{};
  c.heads = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
