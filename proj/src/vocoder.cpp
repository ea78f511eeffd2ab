// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/vocoder.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "lipspeech/error.hpp"

namespace lipspeech {

namespace {

constexpr double kSlope = 0.1;
constexpr Index kPrePostKernel = 7;

nn::Conv1dOptions padded(Index kernel, Index dilation = 1, Index stride = 1, Index groups = 1) {
  nn::Conv1dOptions o;
  o.padding = dilation * (kernel - 1) / 2;
  o.dilation = dilation;
  o.stride = stride;
  o.groups = groups;
  return o;
}

// [L, C] <-> [1, C, L]
Tensor to_channels(const Tensor& x) { return ops::reshape(ops::transpose(x, 0, 1), {1, x.dim(1), x.dim(0)}); }

}  // namespace

Index GeneratorConfig::hop() const {
  return std::accumulate(upsample_strides.begin(), upsample_strides.end(), Index{1}, std::multiplies<>());
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("generator: " + what); };
  if (upsample_kernels.size() != upsample_strides.size() || upsample_kernels.empty())
    fail("upsample kernels and strides must have equal, non-zero length");
  for (std::size_t i = 0; i < upsample_kernels.size(); ++i) {
    const Index k = upsample_kernels[i], s = upsample_strides[i];
    if (s <= 0 || k < s) fail("each upsample kernel must be at least its stride");
    if ((k - s) % 2 != 0) fail("kernel minus stride must be even for an exact length law");
  }
  if (resblock_kernels.empty() || resblock_kernels.size() != resblock_dilations.size())
    fail("one dilation list per resblock kernel");
  for (Index k : resblock_kernels)
    if (k <= 0 || k % 2 == 0) fail("resblock kernels must be odd");
  if (in_dim <= 0 || n_mels <= 0) fail("dimensions must be positive");
  if (base_channels >> upsample_strides.size() < 1) fail("base_channels too small for the number of upsampling stages");
}

ResBlock::ResBlock(Index channels, Index kernel, const std::vector<Index>& dilations, Rng& rng) {
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    dilated_.push_back(std::make_unique<nn::Conv1d>(channels, channels, kernel, padded(kernel, dilations[i]), rng));
    plain_.push_back(std::make_unique<nn::Conv1d>(channels, channels, kernel, padded(kernel), rng));
    add_child("convs1." + std::to_string(i), *dilated_.back());
    add_child("convs2." + std::to_string(i), *plain_.back());
    radius_ += (dilations[i] + 1) * (kernel - 1) / 2;
  }
}

Tensor ResBlock::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < dilated_.size(); ++i) {
    Tensor t = dilated_[i]->forward(ops::leaky_relu(h, kSlope));
    t = plain_[i]->forward(ops::leaky_relu(t, kSlope));
    h = ops::add(h, t);
  }
  return h;
}

Generator::Generator(const GeneratorConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)), projection_(cfg.in_dim, cfg.n_mels, true, rng),
      conv_pre_(cfg.n_mels, cfg.base_channels, kPrePostKernel, padded(kPrePostKernel), rng),
      conv_post_(cfg.base_channels >> cfg.upsample_strides.size(), 1, kPrePostKernel, padded(kPrePostKernel), rng) {
  add_child("projection", projection_);
  add_child("conv_pre", conv_pre_);
  Index ch = cfg.base_channels;
  for (std::size_t i = 0; i < cfg.upsample_strides.size(); ++i) {
    const Index k = cfg.upsample_kernels[i], s = cfg.upsample_strides[i];
    ups_.push_back(std::make_unique<nn::ConvTranspose1d>(ch, ch / 2, k, s, (k - s) / 2, rng));
    add_child("ups." + std::to_string(i), *ups_.back());
    ch /= 2;
    resblocks_.emplace_back();
    for (std::size_t j = 0; j < cfg.resblock_kernels.size(); ++j) {
      resblocks_.back().push_back(std::make_unique<ResBlock>(ch, cfg.resblock_kernels[j], cfg.resblock_dilations[j], rng));
      add_child("resblocks." + std::to_string(i) + "." + std::to_string(j), *resblocks_.back().back());
    }
  }
  add_child("conv_post", conv_post_);
}

Tensor Generator::generate(const Tensor& acoustic) const {
  if (acoustic.rank() != 2 || acoustic.dim(1) != cfg_.in_dim)
    throw InputError("generator expects [L, " + std::to_string(cfg_.in_dim) + "] features, got " + shape_str(acoustic.shape()));
  return synthesize(projection_.forward(acoustic));
}

Tensor Generator::synthesize(const Tensor& mel) const {
  if (mel.rank() != 2 || mel.dim(1) != cfg_.n_mels)
    throw InputError("generator expects [L, " + std::to_string(cfg_.n_mels) + "] mel features, got " + shape_str(mel.shape()));
  Tensor x = conv_pre_.forward(to_channels(mel));
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    x = ups_[i]->forward(ops::leaky_relu(x, kSlope));
    Tensor acc = resblocks_[i][0]->forward(x);
    for (std::size_t j = 1; j < resblocks_[i].size(); ++j) acc = ops::add(acc, resblocks_[i][j]->forward(x));
    x = ops::mul_scalar(acc, 1.0 / static_cast<double>(resblocks_[i].size()));
  }
  x = ops::tanh(conv_post_.forward(ops::leaky_relu(x, 0.01)));
  return ops::reshape(x, {x.dim(2)});
}

std::pair<Index, Index> Generator::influence(Index frame) const {
  const Index edge = (kPrePostKernel - 1) / 2;
  Index lo = frame - edge, hi = frame + edge;
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    const Index k = cfg_.upsample_kernels[i], s = cfg_.upsample_strides[i], p = (k - s) / 2;
    lo = lo * s - p;
    hi = hi * s - p + k - 1;
    Index grow = 0;
    for (const auto& rb : resblocks_[i]) grow = std::max(grow, rb->radius());
    lo -= grow;
    hi += grow;
  }
  return {lo - edge, hi + edge};
}

// --- discriminators -----------------------------------------------------------

Index DiscriminatorConfig::min_length() const {
  const Index p = periods.empty() ? 1 : *std::max_element(periods.begin(), periods.end());
  return 2 * p;
}

void DiscriminatorConfig::validate() const {
  for (Index p : periods)
    if (p < 1) throw ConfigError("discriminator periods must be positive");
  if (scales < 0) throw ConfigError("discriminator scale count must be non-negative");
  if (channel_divisor < 1) throw ConfigError("discriminator channel divisor must be positive");
  if (periods.empty() && scales == 0) throw ConfigError("at least one discriminator required");
}

ConvStack::ConvStack(const std::vector<Layer>& layers, Rng& rng) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const Index g = std::gcd(std::gcd(l.in, l.out), l.groups);
    convs_.push_back(std::make_unique<nn::Conv1d>(l.in, l.out, l.kernel, padded(l.kernel, 1, l.stride, g), rng));
    add_child(i + 1 == layers.size() ? std::string("conv_post") : "convs." + std::to_string(i), *convs_.back());
  }
}

Tensor ConvStack::forward(const Tensor& x, std::vector<Tensor>& features) const {
  Tensor h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i]->forward(h);
    if (i + 1 < convs_.size()) h = ops::leaky_relu(h, kSlope);
    features.push_back(h);
  }
  return ops::reshape(h, {h.numel()});
}

namespace {

Index scaled(Index c, Index divisor) { return std::max<Index>(4, c / divisor); }

std::vector<ConvStack::Layer> period_layers(Index div) {
  const Index c[] = {scaled(32, div), scaled(128, div), scaled(512, div), scaled(1024, div)};
  return {{1, c[0], 5, 3, 1}, {c[0], c[1], 5, 3, 1}, {c[1], c[2], 5, 3, 1}, {c[2], c[3], 5, 3, 1},
          {c[3], c[3], 5, 1, 1}, {c[3], 1, 3, 1, 1}};
}

std::vector<ConvStack::Layer> scale_layers(Index div) {
  const Index a = scaled(128, div), b = scaled(256, div), c = scaled(512, div), d = scaled(1024, div);
  return {{1, a, 15, 1, 1},  {a, a, 41, 2, 4},   {a, b, 41, 2, 16}, {b, c, 41, 4, 16},
          {c, d, 41, 4, 16}, {d, d, 41, 1, 16}, {d, d, 5, 1, 1},    {d, 1, 3, 1, 1}};
}

}  // namespace

PeriodDiscriminator::PeriodDiscriminator(Index period, Index divisor, Rng& rng)
    : period_(period), stack_(period_layers(divisor), rng) {
  add_child("stack", stack_);
}

Tensor PeriodDiscriminator::forward(const Tensor& wave, std::vector<Tensor>& features, Index* padded_length) const {
  const Index len = wave.dim(0);
  const Index pad = (period_ - len % period_) % period_;
  Tensor x = pad ? ops::pad_last(wave, 0, pad, ops::PadMode::kReflect) : wave;
  const Index rows = (len + pad) / period_;
  if (padded_length) *padded_length = len + pad;
  // Column j holds samples j, j + p, j + 2p, ...: one batch entry per phase.
  x = ops::transpose(ops::reshape(x, {rows, period_}), 0, 1);
  return stack_.forward(ops::reshape(x, {period_, 1, rows}), features);
}

ScaleDiscriminator::ScaleDiscriminator(Index divisor, Rng& rng) : stack_(scale_layers(divisor), rng) {
  add_child("stack", stack_);
}

Discriminators::Discriminators(const DiscriminatorConfig& cfg, Rng& rng) : cfg_((cfg.validate(), cfg)) {
  for (std::size_t i = 0; i < cfg.periods.size(); ++i) {
    periods_.push_back(std::make_unique<PeriodDiscriminator>(cfg.periods[i], cfg.channel_divisor, rng));
    add_child("mpd." + std::to_string(i), *periods_.back());
  }
  for (Index i = 0; i < cfg.scales; ++i) {
    scales_.push_back(std::make_unique<ScaleDiscriminator>(cfg.channel_divisor, rng));
    add_child("msd." + std::to_string(i), *scales_.back());
  }
}

DiscriminatorOutput Discriminators::discriminate(const Tensor& wave) const {
  if (wave.rank() != 1) throw InputError("discriminator expects a 1-D waveform, got " + shape_str(wave.shape()));
  if (wave.dim(0) < cfg_.min_length())
    throw InputError("waveform of " + std::to_string(wave.dim(0)) + " samples is shorter than the discriminator minimum of " +
                     std::to_string(cfg_.min_length()));
  DiscriminatorOutput out;
  for (const auto& d : periods_) {
    out.features.emplace_back();
    Index padded = 0;
    out.scores.push_back(d->forward(wave, out.features.back(), &padded));
    out.input_lengths.push_back(padded);
  }
  Tensor x = ops::reshape(wave, {1, 1, wave.dim(0)});
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    if (i > 0) x = ops::avg_pool1d(x, 4, 2, 2);
    out.features.emplace_back();
    out.input_lengths.push_back(x.dim(2));
    out.scores.push_back(scales_[i]->forward(x, out.features.back()));
  }
  return out;
}

}  // namespace lipspeech
