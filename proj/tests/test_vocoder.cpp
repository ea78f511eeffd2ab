// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <random>

#include "doctest.h"
#include "lipspeech/error.hpp"
#include "lipspeech/losses.hpp"
#include "lipspeech/ops.hpp"
#include "lipspeech/vocoder.hpp"
#include "test_util.hpp"

using namespace lipspeech;
using lipspeech::testing::max_abs_diff;
using lipspeech::testing::random_tensor;

namespace {

GeneratorConfig toy_generator(Index in_dim = 12) {
  GeneratorConfig c;
  c.in_dim = in_dim;
  c.base_channels = 32;
  return c;
}

DiscriminatorConfig toy_discriminators() {
  DiscriminatorConfig c;
  c.channel_divisor = 32;
  return c;
}

}  // namespace

TEST_CASE("generator strides multiply to the hop") {
  GeneratorConfig cfg;
  CHECK(cfg.hop() == 5 * 5 * 4 * 2);
  CHECK(cfg.hop() == 200);
  for (std::size_t i = 0; i < cfg.upsample_kernels.size(); ++i) CHECK(cfg.upsample_kernels[i] >= cfg.upsample_strides[i]);
}

TEST_CASE("full-width generator length") {
  GeneratorConfig cfg;
  Rng rng(1);
  Generator gen(cfg, rng);
  std::mt19937_64 trng(2);
  NoGradGuard g;
  CHECK(gen.generate(random_tensor({240, 384}, trng)).shape() == Shape{48000});
}

TEST_CASE("generator length law and bounds") {
  Rng rng(3);
  Generator gen(toy_generator(), rng);
  std::mt19937_64 trng(4);
  std::uniform_int_distribution<Index> len(1, 40);
  NoGradGuard g;
  CHECK(gen.generate(random_tensor({1, 12}, trng)).dim(0) == 200);
  for (int i = 0; i < 20; ++i) {
    const Index l = len(trng);
    CHECK(gen.generate(random_tensor({l, 12}, trng)).dim(0) == 200 * l);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor y = gen.generate(random_tensor({2, 12}, trng, 50.0));
    for (double v : y.values()) CHECK_UNARY(v >= -1.0 && v <= 1.0);
  }
  CHECK_THROWS_AS(gen.generate(random_tensor({3, 10}, trng)), InputError);
}

TEST_CASE("a frame influences only its receptive field") {
  Rng rng(5);
  Generator gen(toy_generator(), rng);
  std::mt19937_64 trng(6);
  Tensor x = random_tensor({60, 12}, trng);
  NoGradGuard g;
  Tensor base = gen.generate(x);
  const Index i = 30;
  Tensor y = x.detach();
  for (Index c = 0; c < 12; ++c) y.data()[i * 12 + c] = 0.0;
  Tensor pert = gen.generate(y);
  const auto [lo, hi] = gen.influence(i);
  MESSAGE("frame " << i << " reaches samples [" << lo << ", " << hi << "]");
  CHECK(lo > 0);
  CHECK(lo <= i * 200);
  CHECK(hi >= (i + 1) * 200 - 1);
  CHECK(hi < base.dim(0) - 1);
  Index changed = 0;
  for (Index s = 0; s < base.dim(0); ++s) {
    const bool diff = base.values()[s] != pert.values()[s];
    if (s < lo || s > hi) CHECK_FALSE(diff);
    changed += diff;
  }
  CHECK(changed > 0);
}

TEST_CASE("discriminators on a 1.2 s window") {
  DiscriminatorConfig cfg;
  cfg.channel_divisor = 8;
  Rng rng(7);
  Discriminators d(cfg, rng);
  std::mt19937_64 trng(8);
  Tensor wave = random_tensor({19200}, trng, 0.3);
  NoGradGuard g;
  DiscriminatorOutput a = d.discriminate(wave);
  CHECK(a.scores.size() == 8);
  CHECK(a.features.size() == 8);
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(a.scores[i].numel() > 0);
    CHECK(a.features[i].size() == (i < 5 ? 6u : 8u));
  }
  DiscriminatorOutput b = d.discriminate(wave);
  for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i].values() == b.scores[i].values());
}

TEST_CASE("period discriminators pad to a multiple of the period") {
  Rng rng(9);
  Discriminators d(toy_discriminators(), rng);
  std::mt19937_64 trng(10);
  NoGradGuard g;
  const Index len = 1003;
  DiscriminatorOutput out = d.discriminate(random_tensor({len}, trng));
  const std::vector<Index> periods{2, 3, 5, 7, 11};
  for (std::size_t i = 0; i < periods.size(); ++i) {
    const Index p = periods[i];
    CHECK(out.input_lengths[i] == (len + p - 1) / p * p);
  }
  CHECK(out.input_lengths[5] == len);
  CHECK(out.input_lengths[6] == len / 2 + 1);
  CHECK_THROWS_AS(d.discriminate(random_tensor({21}, trng)), InputError);
  CHECK_NOTHROW(d.discriminate(random_tensor({22}, trng)));
}

TEST_CASE("every parameter receives gradient from the stage-2 objectives") {
  Rng rng(11);
  Generator gen(toy_generator(), rng);
  Discriminators disc(toy_discriminators(), rng);
  std::mt19937_64 trng(12);
  Tensor x = random_tensor({6, 12}, trng);
  Tensor ref = random_tensor({1200}, trng, 0.3);
  media::MelConfig mel;

  Tensor fake = gen.generate(x);
  DiscriminatorOutput real_out = disc.discriminate(ref);
  DiscriminatorOutput fake_out = disc.discriminate(fake);
  losses::Stage2Loss l = losses::stage2_losses(real_out, fake_out, fake, ref, mel);
  l.generator_total.backward();
  for (auto& [name, t] : gen.named_parameters()) {
    double norm = 0.0;
    for (double v : t.grad()) norm += v * v;
    CHECK_MESSAGE(norm > 0.0, name);
  }
  for (auto& t : disc.parameters()) t.zero_grad();
  DiscriminatorOutput real2 = disc.discriminate(ref);
  DiscriminatorOutput fake2 = disc.discriminate(fake.detach());
  losses::adversarial_losses(real2.scores, fake2.scores).discriminator.backward();
  for (auto& [name, t] : disc.named_parameters()) {
    double norm = 0.0;
    for (double v : t.grad()) norm += v * v;
    CHECK_MESSAGE(norm > 0.0, name);
  }
}

TEST_CASE("generator configuration errors") {
  GeneratorConfig c;
  c.upsample_kernels = {4, 9, 8, 4};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.upsample_kernels = {10, 9, 8, 4};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.resblock_kernels = {3, 7};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
