// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lipspeech/error.hpp"
#include "lipspeech/losses.hpp"
#include "lipspeech/ops.hpp"
#include "test_util.hpp"

using namespace lipspeech;
using namespace lipspeech::losses;
using lipspeech::testing::gradient_check;
using lipspeech::testing::random_tensor;

namespace {

// Fixed 4-frame, 6-bin example in [0, 1].
Tensor example_target() {
  return Tensor({4, 6}, {0.1, 0.5, 0.9, 0.3, 0.7, 0.2,  //
                         0.8, 0.6, 0.4, 0.2, 0.0, 0.5,  //
                         0.3, 0.3, 0.9, 0.9, 0.1, 0.6,  //
                         0.5, 0.45, 0.55, 0.4, 0.6, 0.5});
}

double ssim_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double vx = 0, vy = 0, c = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx) / n;
    vy += (y[i] - my) * (y[i] - my) / n;
    c += (x[i] - mx) * (y[i] - my) / n;
  }
  const double c1 = 1e-4, c2 = 9e-4;
  return (2 * mx * my + c1) * (2 * c + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

std::vector<double> row(const Tensor& t, Index r) {
  const Index n = t.dim(1);
  return {t.values().begin() + r * n, t.values().begin() + (r + 1) * n};
}

Tensor sine(double hz, Index n, double amp = 0.5) {
  Tensor t({n});
  for (Index i = 0; i < n; ++i) t.data()[i] = amp * std::sin(2 * std::numbers::pi * hz * i / 16000.0);
  return t;
}

}  // namespace

TEST_CASE("ssim loss identities") {
  Tensor y = example_target();
  CHECK(ssim_loss(y, y).item() == doctest::Approx(0.0).epsilon(1e-12));
  Tensor c({3, 80}, 0.37);
  CHECK(std::abs(ssim_loss(c, c).item()) < 1e-12);

  Tensor inv = ops::add_scalar(ops::mul_scalar(y, -1.0), 1.0);
  const double loss = ssim_loss(inv, y).item();
  double oracle = 0.0;
  for (Index f = 0; f < 4; ++f) oracle += (1.0 - ssim_oracle(row(inv, f), row(y, f))) / 4.0;
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(loss > 1.0);
  CHECK(loss <= 2.0);
  CHECK_THROWS_AS(ssim_loss(y, Tensor({4, 5})), InputError);
}

TEST_CASE("l1 loss") {
  Tensor y = example_target();
  CHECK(l1_loss(y, y).item() == 0.0);
  std::mt19937_64 rng(1);
  Tensor t = random_tensor({10, 80}, rng);
  CHECK(l1_loss(ops::add_scalar(t, 0.1), t).item() == doctest::Approx(8.0).epsilon(1e-12));
  Tensor a({1, 80}), b({1, 80});
  a.data()[0] = 1.0;
  CHECK(l1_loss(a, b).item() == 1.0);
}

TEST_CASE("stage-1 loss combines components") {
  Tensor y = example_target();
  Tensor p = ops::add_scalar(ops::mul_scalar(y, 0.8), 0.05);
  CHECK(stage1_loss(y, y).total.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(stage1_loss(p, y, {1.0, 0.0}).total.item() == doctest::Approx(ssim_loss(p, y).item()).epsilon(1e-14));
  double ssim = 0.0, l1 = 0.0;
  for (Index f = 0; f < 4; ++f) {
    ssim += (1.0 - ssim_oracle(row(p, f), row(y, f))) / 4.0;
    for (double d : row(ops::sub(p, y), f)) l1 += std::abs(d) / 4.0;
  }
  Stage1Loss s = stage1_loss(p, y, {1.0, 1.0});
  CHECK(s.ssim.item() == doctest::Approx(ssim).epsilon(1e-12));
  CHECK(s.l1.item() == doctest::Approx(l1).epsilon(1e-12));
  CHECK(s.total.item() == doctest::Approx(ssim + l1).epsilon(1e-12));
}

TEST_CASE("least-squares adversarial losses") {
  auto full = [](double v) { return std::vector<Tensor>{Tensor({3, 4}, v), Tensor({7}, v)}; };
  AdversarialLoss a = adversarial_losses(full(1.0), full(0.0));
  CHECK(std::abs(a.discriminator.item()) < 1e-9);
  CHECK(std::abs(a.generator.item() - 1.0) < 1e-9);
  AdversarialLoss b = adversarial_losses(full(0.0), full(1.0));
  CHECK(std::abs(b.discriminator.item() - 2.0) < 1e-9);
  CHECK(std::abs(b.generator.item()) < 1e-9);
  AdversarialLoss c = adversarial_losses({Tensor::scalar(0.5)}, {Tensor::scalar(0.5)});
  CHECK(std::abs(c.discriminator.item() - 0.5) < 1e-9);
  CHECK(std::abs(c.generator.item() - 0.25) < 1e-9);
}

TEST_CASE("feature matching") {
  std::vector<Tensor> a{Tensor({4}, 1.0), Tensor({2}, -0.3)};
  std::vector<Tensor> b{Tensor({4}, 1.1), Tensor({2}, 0.1)};
  CHECK(std::abs(feature_matching_loss(a, b).item() - 0.5) < 1e-9);
  CHECK(feature_matching_loss(a, a).item() == 0.0);
  CHECK(std::abs(feature_matching_loss({Tensor::scalar(3.0)}, {Tensor::scalar(1.0)}).item() - 2.0) < 1e-12);
  CHECK_THROWS_AS(feature_matching_loss(a, {Tensor({4})}), InputError);
  // Mean over sub-discriminators.
  std::vector<std::vector<Tensor>> ra{a, a}, fb{b, a};
  CHECK(std::abs(feature_matching_loss(ra, fb).item() - 0.25) < 1e-9);
}

TEST_CASE("mel loss") {
  media::MelConfig cfg;
  Tensor s = sine(440.0, 16000);
  Tensor z({16000});
  CHECK(mel_loss(s, s, cfg).item() == 0.0);
  const double d = mel_loss(z, s, cfg).item();
  CHECK(d > 0.0);
  CHECK(mel_loss(s, z, cfg).item() == doctest::Approx(d).epsilon(1e-12));
  const std::vector<double> ms = media::log_mel(s.values(), cfg, nullptr);
  const std::vector<double> mz = media::log_mel(z.values(), cfg, nullptr);
  double oracle = 0.0;
  for (std::size_t i = 0; i < ms.size(); ++i) oracle += std::abs(ms[i] - mz[i]) / static_cast<double>(ms.size());
  CHECK(d == doctest::Approx(oracle).epsilon(1e-9));
  CHECK_THROWS_AS(mel_loss(s, Tensor({10}), cfg), InputError);
}

TEST_CASE("differentiable log-mel matches the feature extractor") {
  media::MelConfig cfg;
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({4000}, rng, 0.3);
  Tensor m = log_mel(x, cfg);
  const std::vector<double> ref = media::log_mel(x.values(), cfg, nullptr);
  CHECK(m.shape() == Shape{20, 80});
  CHECK(testing::max_abs_diff(m.values(), ref) < 1e-9);
}

TEST_CASE("stage-2 losses") {
  media::MelConfig cfg;
  std::mt19937_64 rng(4);
  Tensor ref = random_tensor({1200}, rng, 0.3);
  DiscriminatorOutput real, fake;
  real.scores = {Tensor({5}, 1.0), Tensor({3}, 1.0)};
  fake.scores = {Tensor({5}, 1.0), Tensor({3}, 1.0)};
  real.features = {{Tensor({4}, 0.2)}, {Tensor({2}, 0.5)}};
  fake.features = real.features;
  Stage2Loss perfect = stage2_losses(real, fake, ref, ref, cfg);
  CHECK(std::abs(perfect.generator_total.item()) < 1e-12);

  Tensor gen = random_tensor({1200}, rng, 0.3);
  fake.scores = {random_tensor({5}, rng), random_tensor({3}, rng)};
  fake.features = {{random_tensor({4}, rng)}, {random_tensor({2}, rng)}};
  Stage2Loss adv_only = stage2_losses(real, fake, gen, ref, cfg, {1.0, 0.0, 0.0});
  CHECK(adv_only.generator_total.item() == doctest::Approx(adversarial_losses(real.scores, fake.scores).generator.item()).epsilon(1e-14));

  Stage2Loss full = stage2_losses(real, fake, gen, ref, cfg);
  const double adv = adversarial_losses(real.scores, fake.scores).generator.item();
  const double mel = mel_loss(gen, ref, cfg).item();
  const double fm = feature_matching_loss(real.features, fake.features).item();
  CHECK(full.generator_total.item() == doctest::Approx(adv + 45.0 * mel + 2.0 * fm).epsilon(1e-12));
  // The discriminator objective ignores the mel and feature weights.
  Stage2Loss other = stage2_losses(real, fake, gen, ref, cfg, {1.0, 3.0, 7.0});
  CHECK(other.discriminator_total.item() == full.discriminator_total.item());
  CHECK(full.discriminator_total.item() == doctest::Approx(adversarial_losses(real.scores, fake.scores).discriminator.item()).epsilon(1e-14));
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(12);
  SUBCASE("ssim") {
    Tensor p({5, 80}), t({5, 80});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : p.data()) v = u(rng);
    for (double& v : t.data()) v = u(rng);
    p.set_requires_grad(true);
    t.set_requires_grad(true);
    CHECK(gradient_check([&] { return ssim_loss(p, t); }, {p, t}) < 1e-4);
  }
  SUBCASE("feature matching") {
    std::vector<Tensor> real{random_tensor({6}, rng, 1.0, true), random_tensor({2, 3}, rng, 1.0, true)};
    std::vector<Tensor> fake{random_tensor({6}, rng, 1.0, true), random_tensor({2, 3}, rng, 1.0, true)};
    std::vector<Tensor> all{real[0], real[1], fake[0], fake[1]};
    CHECK(gradient_check([&] { return feature_matching_loss(real, fake); }, all) < 1e-4);
  }
  SUBCASE("mel loss") {
    media::MelConfig cfg;
    Tensor gen = random_tensor({900}, rng, 0.3, true);
    Tensor ref = random_tensor({900}, rng, 0.3);
    CHECK(gradient_check([&] { return mel_loss(gen, ref, cfg); }, {gen}) < 1e-4);
  }
  SUBCASE("adversarial") {
    std::vector<Tensor> r{random_tensor({4}, rng, 1.0, true)}, f{random_tensor({4}, rng, 1.0, true)};
    CHECK(gradient_check([&] { return adversarial_losses(r, f).discriminator; }, {r[0], f[0]}) < 1e-6);
    CHECK(gradient_check([&] { return adversarial_losses(r, f).generator; }, {f[0]}) < 1e-6);
  }
}
