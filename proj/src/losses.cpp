// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/losses.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "lipspeech/error.hpp"
#include "lipspeech/fft.hpp"
#include "lipspeech/ops.hpp"

namespace lipspeech::losses {

using detail::Node;

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw InputError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor ssim_frames(const Tensor& pred, const Tensor& target, double dynamic_range) {
  same_shape(pred, target, "ssim");
  if (pred.rank() != 2) throw InputError("ssim expects [frames, bins]");
  const Index frames = pred.dim(0), n = pred.dim(1);
  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  struct Stats {
    double mx, my, a1, a2, b1, b2;
  };
  std::vector<Stats> stats(static_cast<std::size_t>(frames));
  std::vector<double> out(static_cast<std::size_t>(frames));
  const double* x = pred.data().data();
  const double* y = target.data().data();
  for (Index f = 0; f < frames; ++f) {
    const double* xr = x + f * n;
    const double* yr = y + f * n;
    double mx = 0, my = 0;
    for (Index i = 0; i < n; ++i) {
      mx += xr[i];
      my += yr[i];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cxy = 0;
    for (Index i = 0; i < n; ++i) {
      vx += (xr[i] - mx) * (xr[i] - mx);
      vy += (yr[i] - my) * (yr[i] - my);
      cxy += (xr[i] - mx) * (yr[i] - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    Stats s{mx, my, 2 * mx * my + c1, 2 * cxy + c2, mx * mx + my * my + c1, vx + vy + c2};
    stats[static_cast<std::size_t>(f)] = s;
    out[static_cast<std::size_t>(f)] = s.a1 * s.a2 / (s.b1 * s.b2);
  }
  return make_result({frames}, std::move(out), {pred, target}, [stats = std::move(stats), frames, n](Node& self) {
    const double* x = self.input_value(0);
    const double* y = self.input_value(1);
    double* gx = self.input_grad(0);
    double* gy = self.input_grad(1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Index f = 0; f < frames; ++f) {
      const Stats& s = stats[static_cast<std::size_t>(f)];
      const double g = self.grad[static_cast<std::size_t>(f)] * self.value[static_cast<std::size_t>(f)];
      for (Index i = 0; i < n; ++i) {
        const double dx = x[f * n + i] - s.mx, dy = y[f * n + i] - s.my;
        // dS/dx_i = S (A1'/A1 + A2'/A2 - B1'/B1 - B2'/B2), and symmetrically for y.
        if (gx)
          gx[f * n + i] += g * 2 * inv_n * (s.my / s.a1 + dy / s.a2 - s.mx / s.b1 - dx / s.b2);
        if (gy)
          gy[f * n + i] += g * 2 * inv_n * (s.mx / s.a1 + dx / s.a2 - s.my / s.b1 - dy / s.b2);
      }
    }
  });
}

Tensor ssim_loss(const Tensor& pred, const Tensor& target) {
  return ops::add_scalar(ops::mul_scalar(ops::mean(ssim_frames(pred, target)), -1.0), 1.0);
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  same_shape(pred, target, "l1");
  if (pred.rank() != 2) throw InputError("l1 expects [frames, bins]");
  return ops::mul_scalar(ops::sum(ops::abs(ops::sub(pred, target))), 1.0 / static_cast<double>(pred.dim(0)));
}

Stage1Loss stage1_loss(const Tensor& pred, const Tensor& target, const Stage1Weights& w) {
  if (w.ssim < 0 || w.l1 < 0) throw ConfigError("stage-1 loss weights must be non-negative");
  Stage1Loss out;
  out.ssim = ssim_loss(pred, target);
  out.l1 = l1_loss(pred, target);
  out.total = ops::add(ops::mul_scalar(out.ssim, w.ssim), ops::mul_scalar(out.l1, w.l1));
  return out;
}

AdversarialLoss adversarial_losses(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores) {
  if (real_scores.size() != fake_scores.size() || real_scores.empty())
    throw InputError("adversarial loss needs matching, non-empty score lists");
  Tensor d = Tensor::scalar(0.0), g = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    d = ops::add(d, ops::add(ops::mean(ops::square(ops::add_scalar(real_scores[i], -1.0))),
                             ops::mean(ops::square(fake_scores[i]))));
    g = ops::add(g, ops::mean(ops::square(ops::add_scalar(fake_scores[i], -1.0))));
  }
  const double inv = 1.0 / static_cast<double>(real_scores.size());
  return {ops::mul_scalar(d, inv), ops::mul_scalar(g, inv)};
}

Tensor log_mel(const Tensor& wave, const media::MelConfig& cfg) {
  if (wave.rank() != 1 || wave.numel() == 0) throw InputError("log_mel expects a non-empty 1-D waveform");
  using Complex = std::complex<double>;
  const Index len = wave.dim(0);
  const Index frames = cfg.frames_for(len);
  const Index n_fft = cfg.n_fft, bins = n_fft / 2 + 1, mels = cfg.n_mels;
  const std::vector<double> window = media::analysis_window(cfg);
  const std::vector<double> fb = media::mel_filterbank(cfg);
  auto fft = std::make_shared<RealFft>(n_fft);
  auto reflect = [len](Index i) {
    if (len == 1) return Index{0};
    const Index period = 2 * (len - 1);
    i %= period;
    if (i < 0) i += period;
    return i < len ? i : period - i;
  };

  std::vector<Complex> spec(static_cast<std::size_t>(frames * bins));
  std::vector<double> mel(static_cast<std::size_t>(frames * mels));
  const double* x = wave.data().data();
#pragma omp parallel
  {
    std::vector<double> buf(static_cast<std::size_t>(n_fft));
#pragma omp for schedule(static)
    for (Index t = 0; t < frames; ++t) {
      const Index start = t * cfg.hop - n_fft / 2;
      for (Index j = 0; j < n_fft; ++j) buf[static_cast<std::size_t>(j)] = window[static_cast<std::size_t>(j)] * x[reflect(start + j)];
      Complex* s = spec.data() + t * bins;
      fft->forward(buf.data(), s);
      for (Index m = 0; m < mels; ++m) {
        double acc = 0.0;
        for (Index k = 0; k < bins; ++k) acc += fb[static_cast<std::size_t>(m * bins + k)] * std::abs(s[k]);
        mel[static_cast<std::size_t>(t * mels + m)] = acc;
      }
    }
  }
  std::vector<double> out(mel.size());
  for (std::size_t i = 0; i < mel.size(); ++i) out[i] = std::log(std::max(mel[i], cfg.log_floor));

  return make_result({frames, mels}, std::move(out), {wave},
                     [=, spec = std::move(spec), mel = std::move(mel)](Node& self) {
                       double* gx = self.input_grad(0);
                       if (!gx) return;
                       std::vector<double> dy(static_cast<std::size_t>(frames * n_fft));
#pragma omp parallel
                       {
                         std::vector<double> g_mag(static_cast<std::size_t>(bins));
                         std::vector<Complex> z(static_cast<std::size_t>(bins));
#pragma omp for schedule(static)
                         for (Index t = 0; t < frames; ++t) {
                           std::fill(g_mag.begin(), g_mag.end(), 0.0);
                           for (Index m = 0; m < mels; ++m) {
                             const double e = mel[static_cast<std::size_t>(t * mels + m)];
                             if (e <= cfg.log_floor) continue;
                             const double gm = self.grad[static_cast<std::size_t>(t * mels + m)] / e;
                             for (Index k = 0; k < bins; ++k) g_mag[static_cast<std::size_t>(k)] += gm * fb[static_cast<std::size_t>(m * bins + k)];
                           }
                           // d|X_k|/dy_n = Re(conj(X_k) e^{-i w_k n}) / |X_k|; summed over bins
                           // with a half-spectrum inverse transform.
                           const Complex* s = spec.data() + t * bins;
                           for (Index k = 0; k < bins; ++k) {
                             const double a = std::abs(s[k]);
                             const Complex unit = a > 1e-300 ? s[k] / a : Complex(0.0, 0.0);
                             const double half = (k == 0 || 2 * k == n_fft) ? 1.0 : 0.5;
                             z[static_cast<std::size_t>(k)] = half * g_mag[static_cast<std::size_t>(k)] * unit;
                           }
                           fft->inverse(z.data(), dy.data() + t * n_fft);
                         }
                       }
                       for (Index t = 0; t < frames; ++t) {
                         const Index start = t * cfg.hop - n_fft / 2;
                         for (Index j = 0; j < n_fft; ++j)
                           gx[reflect(start + j)] += window[static_cast<std::size_t>(j)] * dy[static_cast<std::size_t>(t * n_fft + j)];
                       }
                     });
}

Tensor mel_loss(const Tensor& generated, const Tensor& reference, const media::MelConfig& cfg) {
  if (generated.rank() != 1 || generated.shape() != reference.shape())
    throw InputError("mel loss needs equal-length waveforms, got " + shape_str(generated.shape()) + " and " +
                     shape_str(reference.shape()));
  Tensor ref;
  {
    NoGradGuard guard;
    ref = log_mel(reference.detach(), cfg);
  }
  return ops::mean(ops::abs(ops::sub(log_mel(generated, cfg), ref)));
}

Tensor feature_matching_loss(const std::vector<Tensor>& real, const std::vector<Tensor>& fake) {
  if (real.size() != fake.size()) throw InputError("feature matching: layer count mismatch");
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < real.size(); ++i) {
    same_shape(real[i], fake[i], "feature matching");
    acc = ops::add(acc, ops::mean(ops::abs(ops::sub(real[i], fake[i]))));
  }
  return acc;
}

Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real,
                             const std::vector<std::vector<Tensor>>& fake) {
  if (real.size() != fake.size() || real.empty()) throw InputError("feature matching: sub-discriminator count mismatch");
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < real.size(); ++i) acc = ops::add(acc, feature_matching_loss(real[i], fake[i]));
  return ops::mul_scalar(acc, 1.0 / static_cast<double>(real.size()));
}

Stage2Loss stage2_losses(const DiscriminatorOutput& real, const DiscriminatorOutput& fake, const Tensor& generated,
                         const Tensor& reference, const media::MelConfig& cfg, const Stage2Weights& w) {
  if (w.adversarial < 0 || w.mel < 0 || w.feature_matching < 0) throw ConfigError("stage-2 loss weights must be non-negative");
  Stage2Loss out;
  AdversarialLoss adv = adversarial_losses(real.scores, fake.scores);
  out.adversarial_g = adv.generator;
  out.discriminator_total = adv.discriminator;
  out.mel = mel_loss(generated, reference, cfg);
  out.feature_matching = feature_matching_loss(real.features, fake.features);
  out.generator_total = ops::add(ops::add(ops::mul_scalar(out.adversarial_g, w.adversarial), ops::mul_scalar(out.mel, w.mel)),
                                 ops::mul_scalar(out.feature_matching, w.feature_matching));
  return out;
}

}  // namespace lipspeech::losses
