// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/frontend.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lipspeech/error.hpp"
#include "lipspeech/kernels.hpp"

namespace lipspeech {

Index FrontendConfig::grid_size() const {
  const Index conv = (frame_size + 2 * conv_padding[1] - conv_kernel[1]) / conv_stride[1] + 1;
  return conv / pool;
}

void FrontendConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("frontend: " + what); };
  if (conv_kernel[1] != conv_kernel[2] || conv_stride[1] != conv_stride[2] || conv_padding[1] != conv_padding[2])
    fail("spatial kernel, stride and padding must be square");
  if (conv_stride[0] != 1 || 2 * conv_padding[0] != conv_kernel[0] - 1)
    fail("temporal convolution must preserve the frame count (stride 1, padding (k-1)/2)");
  const Index conv = (frame_size + 2 * conv_padding[1] - conv_kernel[1]) / conv_stride[1] + 1;
  if (conv <= 0 || pool <= 0 || conv % pool != 0) fail("convolution output " + std::to_string(conv) + " not divisible by pool");
  if (d_token <= 0 || d_s <= 0 || d_t <= 0 || d_ff <= 0) fail("dimensions must be positive");
  if (h_s <= 0 || d_s % h_s != 0) fail("d_s must be divisible by h_s");
  if (h_t <= 0 || d_t % h_t != 0) fail("d_t must be divisible by h_t");
  if (attention_features <= 0) fail("attention feature count must be positive");
  if (!shared_position_embedding && max_frames <= 0) fail("max_frames must be positive");
}

// --- random-feature attention -------------------------------------------------

Tensor orthogonal_features(Index m, Index d, Rng& rng) {
  Tensor out({m, d});
  auto v = out.data();
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index start = 0; start < m; start += d) {
    Eigen::MatrixXd g(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) g(i, j) = gauss(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    const Index rows = std::min(d, m - start);
    for (Index r = 0; r < rows; ++r) {
      double norm2 = 0.0;
      for (Index j = 0; j < d; ++j) {
        const double z = gauss(rng);
        norm2 += z * z;
      }
      const double scale = std::sqrt(norm2);
      for (Index j = 0; j < d; ++j) v[(start + r) * d + j] = q(j, r) * scale;
    }
  }
  return out;
}

namespace {

using kernels::GemmShape;

// Rows of exp(w^T x - |x|^2 / 2 - c) / sqrt(m) for x = scale * rows of src.
// The stabilizer c is the row max for queries and the slice max for keys; it
// cancels in the attention ratio.
void positive_features(const double* src, Index len, Index d, const double* w, Index m, double scale, bool per_row,
                       double* out) {
  std::vector<double> xs(static_cast<std::size_t>(len * d));
  for (Index i = 0; i < len * d; ++i) xs[static_cast<std::size_t>(i)] = src[i] * scale;
  kernels::gemm(GemmShape{len, m, d, false, true}, 1.0, xs.data(), w, 0.0, out);
  double global = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < len; ++i) {
    double half = 0.0;
    for (Index c = 0; c < d; ++c) half += 0.5 * xs[static_cast<std::size_t>(i * d + c)] * xs[static_cast<std::size_t>(i * d + c)];
    double* row = out + i * m;
    for (Index r = 0; r < m; ++r) row[r] -= half;
    global = std::max(global, *std::max_element(row, row + m));
  }
  // The 1/sqrt(m) factor is folded into the exponent.
  const double log_norm = -0.5 * std::log(static_cast<double>(m));
  for (Index i = 0; i < len; ++i) {
    double* row = out + i * m;
    const double shift = (per_row ? *std::max_element(row, row + m) : global) - log_norm;
    for (Index r = 0; r < m; ++r) row[r] -= shift;
  }
  kernels::exp_inplace(out, len * m);
}

// Gradient through positive_features: gz = gP * P, dx = scale * (gz W - sum(gz) x').
void positive_features_backward(const double* src, Index len, Index d, const double* w, Index m, double scale,
                                const double* p, const double* gp, double* gsrc) {
  std::vector<double> gz(static_cast<std::size_t>(len * m));
  std::vector<double> gx(static_cast<std::size_t>(len * d));
  for (Index i = 0; i < len * m; ++i) gz[static_cast<std::size_t>(i)] = gp[i] * p[i];
  kernels::gemm(GemmShape{len, d, m, false, false}, 1.0, gz.data(), w, 0.0, gx.data());
  for (Index i = 0; i < len; ++i) {
    double total = 0.0;
    for (Index r = 0; r < m; ++r) total += gz[static_cast<std::size_t>(i * m + r)];
    for (Index c = 0; c < d; ++c)
      gsrc[i * d + c] += scale * (gx[static_cast<std::size_t>(i * d + c)] - total * scale * src[i * d + c]);
  }
}

}  // namespace

Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& features) {
  if (q.rank() != 3 || k.shape() != q.shape() || v.rank() != 3 || v.dim(0) != q.dim(0) || v.dim(1) != q.dim(1))
    throw InternalError("linear_attention: expected matching [N, L, d] inputs");
  if (features.rank() != 2 || features.dim(1) != q.dim(2))
    throw InternalError("linear_attention: feature matrix must be [m, d]");
  const Index n = q.dim(0), len = q.dim(1), d = q.dim(2), dv = v.dim(2), m = features.dim(0);
  const double scale = std::pow(static_cast<double>(d), -0.25);
  std::vector<double> out(static_cast<std::size_t>(n * len * dv));
  std::vector<double> den(static_cast<std::size_t>(n * len));
  const double* qv = q.data().data();
  const double* kv = k.data().data();
  const double* vv = v.data().data();
  const double* wv = features.data().data();

#pragma omp parallel
  {
    std::vector<double> pq(static_cast<std::size_t>(len * m)), pk(static_cast<std::size_t>(len * m));
    std::vector<double> kvm(static_cast<std::size_t>(m * dv)), ks(static_cast<std::size_t>(m));
#pragma omp for schedule(dynamic)
    for (Index b = 0; b < n; ++b) {
      positive_features(qv + b * len * d, len, d, wv, m, scale, true, pq.data());
      positive_features(kv + b * len * d, len, d, wv, m, scale, false, pk.data());
      kernels::gemm(GemmShape{m, dv, len, true, false}, 1.0, pk.data(), vv + b * len * dv, 0.0, kvm.data());
      std::fill(ks.begin(), ks.end(), 0.0);
      for (Index j = 0; j < len; ++j)
        for (Index r = 0; r < m; ++r) ks[static_cast<std::size_t>(r)] += pk[static_cast<std::size_t>(j * m + r)];
      double* o = out.data() + b * len * dv;
      kernels::gemm(GemmShape{len, dv, m, false, false}, 1.0, pq.data(), kvm.data(), 0.0, o);
      for (Index i = 0; i < len; ++i) {
        double dd = 0.0;
        for (Index r = 0; r < m; ++r) dd += pq[static_cast<std::size_t>(i * m + r)] * ks[static_cast<std::size_t>(r)];
        den[static_cast<std::size_t>(b * len + i)] = dd;
        for (Index c = 0; c < dv; ++c) o[i * dv + c] /= dd;
      }
    }
  }

  return make_result({n, len, dv}, std::move(out), {q, k, v, features},
                     [=, den = std::move(den)](detail::Node& self) {
    const double* qv = self.input_value(0);
    const double* kv = self.input_value(1);
    const double* vv = self.input_value(2);
    const double* wv = self.input_value(3);
    double* gq = self.input_grad(0);
    double* gk = self.input_grad(1);
    double* gv = self.input_grad(2);
    if (!gq && !gk && !gv) return;
#pragma omp parallel
    {
      std::vector<double> pq(static_cast<std::size_t>(len * m)), pk(static_cast<std::size_t>(len * m));
      std::vector<double> kvm(static_cast<std::size_t>(m * dv)), ks(static_cast<std::size_t>(m));
      std::vector<double> gnum(static_cast<std::size_t>(len * dv)), gden(static_cast<std::size_t>(len));
      std::vector<double> gpq(static_cast<std::size_t>(len * m)), gpk(static_cast<std::size_t>(len * m));
      std::vector<double> gkv(static_cast<std::size_t>(m * dv)), gks(static_cast<std::size_t>(m));
#pragma omp for schedule(dynamic)
      for (Index b = 0; b < n; ++b) {
        positive_features(qv + b * len * d, len, d, wv, m, scale, true, pq.data());
        positive_features(kv + b * len * d, len, d, wv, m, scale, false, pk.data());
        kernels::gemm(GemmShape{m, dv, len, true, false}, 1.0, pk.data(), vv + b * len * dv, 0.0, kvm.data());
        std::fill(ks.begin(), ks.end(), 0.0);
        for (Index j = 0; j < len; ++j)
          for (Index r = 0; r < m; ++r) ks[static_cast<std::size_t>(r)] += pk[static_cast<std::size_t>(j * m + r)];
        const double* g = self.grad.data() + b * len * dv;
        const double* o = self.value.data() + b * len * dv;
        for (Index i = 0; i < len; ++i) {
          const double dd = den[static_cast<std::size_t>(b * len + i)];
          double acc = 0.0;
          for (Index c = 0; c < dv; ++c) {
            gnum[static_cast<std::size_t>(i * dv + c)] = g[i * dv + c] / dd;
            acc += g[i * dv + c] * o[i * dv + c];
          }
          gden[static_cast<std::size_t>(i)] = -acc / dd;
        }
        // out = (Pq KV) / (Pq ks)
        kernels::gemm(GemmShape{len, m, dv, false, true}, 1.0, gnum.data(), kvm.data(), 0.0, gpq.data());
        for (Index i = 0; i < len; ++i)
          for (Index r = 0; r < m; ++r) gpq[static_cast<std::size_t>(i * m + r)] += gden[static_cast<std::size_t>(i)] * ks[static_cast<std::size_t>(r)];
        kernels::gemm(GemmShape{m, dv, len, true, false}, 1.0, pq.data(), gnum.data(), 0.0, gkv.data());
        std::fill(gks.begin(), gks.end(), 0.0);
        for (Index i = 0; i < len; ++i)
          for (Index r = 0; r < m; ++r) gks[static_cast<std::size_t>(r)] += pq[static_cast<std::size_t>(i * m + r)] * gden[static_cast<std::size_t>(i)];
        if (gv) kernels::gemm(GemmShape{len, dv, m, false, false}, 1.0, pk.data(), gkv.data(), 1.0, gv + b * len * dv);
        if (gq) positive_features_backward(qv + b * len * d, len, d, wv, m, scale, pq.data(), gpq.data(), gq + b * len * d);
        if (gk) {
          kernels::gemm(GemmShape{len, m, dv, false, true}, 1.0, vv + b * len * dv, gkv.data(), 0.0, gpk.data());
          for (Index j = 0; j < len; ++j)
            for (Index r = 0; r < m; ++r) gpk[static_cast<std::size_t>(j * m + r)] += gks[static_cast<std::size_t>(r)];
          positive_features_backward(kv + b * len * d, len, d, wv, m, scale, pk.data(), gpk.data(), gk + b * len * d);
        }
      }
    }
  });
}

Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v, Index m, std::uint64_t seed) {
  Rng rng(seed);
  return linear_attention(q, k, v, orthogonal_features(m, q.dim(2), rng));
}

// --- modules ------------------------------------------------------------------

Tokenizer::Tokenizer(const FrontendConfig& cfg, Rng& rng) : cfg_(cfg), norm_(cfg.d_token) {
  const auto& k = cfg.conv_kernel;
  const double bound = 1.0 / std::sqrt(static_cast<double>(3 * k[0] * k[1] * k[2]));
  conv_w_ = add_parameter("conv.weight", nn::uniform({cfg.d_token, 3, k[0], k[1], k[2]}, bound, rng));
  conv_b_ = add_parameter("conv.bias", nn::uniform({cfg.d_token}, bound, rng));
  add_child("norm", norm_);
  const Index n = cfg.tokens_per_frame();
  position_ = add_parameter("position",
                            cfg.shared_position_embedding ? nn::normal({n, cfg.d_token}, 0.02, rng)
                                                          : nn::normal({cfg.max_frames, n, cfg.d_token}, 0.02, rng));
}

Tensor Tokenizer::forward(const Tensor& video) const {
  if (video.rank() != 4 || video.dim(1) != cfg_.frame_size || video.dim(2) != cfg_.frame_size || video.dim(3) != 3)
    throw InputError("tokenizer expects [T, " + std::to_string(cfg_.frame_size) + ", " + std::to_string(cfg_.frame_size) +
                     ", 3] frames, got " + shape_str(video.shape()));
  const Index t = video.dim(0);
  ops::Conv3dParams p{cfg_.conv_stride[0], cfg_.conv_stride[1], cfg_.conv_stride[2],
                      cfg_.conv_padding[0], cfg_.conv_padding[1], cfg_.conv_padding[2]};
  Tensor x = ops::conv3d(video, conv_w_, conv_b_, p);
  x = ops::max_pool2d(norm_.forward(x), cfg_.pool);
  x = ops::reshape(x, {t, cfg_.tokens_per_frame(), cfg_.d_token});
  if (cfg_.shared_position_embedding) return ops::add(x, position_);
  if (t > cfg_.max_frames)
    throw InputError(std::to_string(t) + " frames exceed the per-frame position table (" + std::to_string(cfg_.max_frames) + ")");
  return ops::add(x, ops::slice(position_, 0, 0, t));
}

LinearSelfAttention::LinearSelfAttention(Index dim, Index heads, Index features, Rng& rng)
    : heads_(heads), q_(dim, dim, true, rng), k_(dim, dim, true, rng), v_(dim, dim, true, rng), o_(dim, dim, true, rng) {
  if (dim % heads != 0) throw ConfigError("attention dim must be divisible by heads");
  add_child("q", q_);
  add_child("k", k_);
  add_child("v", v_);
  add_child("o", o_);
  features_ = add_buffer("features", orthogonal_features(features, dim / heads, rng));
}

Tensor LinearSelfAttention::forward(const Tensor& x) const {
  const Index n = x.dim(0), len = x.dim(1), dim = x.dim(2), dh = dim / heads_;
  auto heads = [&](const nn::Linear& proj) {
    return ops::reshape(nn::split_heads(proj.forward(x), heads_), {n * heads_, len, dh});
  };
  Tensor ctx = linear_attention(heads(q_), heads(k_), heads(v_), features_);
  return o_.forward(nn::merge_heads(ops::reshape(ctx, {n, heads_, len, dh})));
}

LocallyEnhancedFeedForward::LocallyEnhancedFeedForward(Index dim, Index expansion, Rng& rng)
    : fc1_(dim, dim * expansion, true, rng), fc2_(dim * expansion, dim, true, rng) {
  add_child("fc1", fc1_);
  dw_w_ = add_parameter("dwconv.weight", nn::uniform({dim * expansion, 3, 3}, 1.0 / 3.0, rng));
  dw_b_ = add_parameter("dwconv.bias", nn::uniform({dim * expansion}, 1.0 / 3.0, rng));
  add_child("fc2", fc2_);
}

Tensor LocallyEnhancedFeedForward::forward(const Tensor& x, Index rows, Index cols) const {
  const Index t = x.dim(0);
  if (x.dim(1) != rows * cols) throw InternalError("token count does not match the grid shape");
  Tensor h = ops::gelu(fc1_.forward(x));
  const Index e = h.dim(2);
  h = ops::reshape(h, {t, rows, cols, e});
  h = ops::gelu(ops::depthwise_conv2d(h, dw_w_, dw_b_));
  return fc2_.forward(ops::reshape(h, {t, rows * cols, e}));
}

SpatialBlock::SpatialBlock(const FrontendConfig& cfg, Rng& rng)
    : norm1_(cfg.d_s), attn_(cfg.d_s, cfg.h_s, cfg.attention_features, rng), norm2_(cfg.d_s),
      leff_(cfg.d_s, cfg.leff_expansion, rng) {
  add_child("norm1", norm1_);
  add_child("attn", attn_);
  add_child("norm2", norm2_);
  add_child("leff", leff_);
}

Tensor SpatialBlock::forward(const Tensor& x, Index rows, Index cols) const {
  Tensor h = ops::add(x, attn_.forward(norm1_.forward(x)));
  return ops::add(h, leff_.forward(norm2_.forward(h), rows, cols));
}

TransformerBlock::TransformerBlock(Index dim, Index heads, Index ff, Rng& rng)
    : norm1_(dim), attn_(dim, heads, rng), norm2_(dim), fc1_(dim, ff, true, rng), fc2_(ff, dim, true, rng) {
  add_child("norm1", norm1_);
  add_child("attn", attn_);
  add_child("norm2", norm2_);
  add_child("ff.fc1", fc1_);
  add_child("ff.fc2", fc2_);
}

Tensor TransformerBlock::forward(const Tensor& x) const {
  Tensor h = ops::add(x, attn_.forward(norm1_.forward(x)));
  return ops::add(h, fc2_.forward(ops::gelu(fc1_.forward(norm2_.forward(h)))));
}

VisualFrontend::VisualFrontend(const FrontendConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)), tokenizer_(cfg, rng), token_proj_(cfg.d_token, cfg.d_s, true, rng),
      concat_proj_(cfg.tokens_per_frame() * cfg.d_s, cfg.d_t, true, rng) {
  add_child("tokenizer", tokenizer_);
  add_child("token_proj", token_proj_);
  for (Index i = 0; i < cfg.spatial_layers; ++i) {
    spatial_.push_back(std::make_unique<SpatialBlock>(cfg, rng));
    add_child("spatial." + std::to_string(i), *spatial_.back());
  }
  add_child("concat_proj", concat_proj_);
  for (Index i = 0; i < cfg.temporal_layers; ++i) {
    temporal_.push_back(std::make_unique<TransformerBlock>(cfg.d_t, cfg.h_t, cfg.d_ff, rng));
    add_child("temporal." + std::to_string(i), *temporal_.back());
  }
}

Tensor VisualFrontend::tokenize(const Tensor& video) const { return tokenizer_.forward(video); }

Tensor VisualFrontend::embed_tokens(const Tensor& tokens) const { return token_proj_.forward(tokens); }

Tensor VisualFrontend::spatial_encode(const Tensor& grid) const {
  const Index g = cfg_.grid_size();
  if (grid.rank() != 3 || grid.dim(1) != g * g || grid.dim(2) != cfg_.d_s)
    throw InternalError("spatial_encode expects [T, " + std::to_string(g * g) + ", " + std::to_string(cfg_.d_s) +
                        "], got " + shape_str(grid.shape()));
  Tensor x = grid;
  for (const auto& block : spatial_) x = block->forward(x, g, g);
  return x;
}

Tensor VisualFrontend::project(const Tensor& grid) const {
  return concat_proj_.forward(ops::reshape(grid, {grid.dim(0), grid.dim(1) * grid.dim(2)}));
}

Tensor VisualFrontend::temporal_encode(const Tensor& x) const {
  const Index t = x.dim(0);
  Tensor h = ops::reshape(ops::add(x, nn::sinusoidal_encoding(t, cfg_.d_t)), {1, t, cfg_.d_t});
  for (const auto& block : temporal_) h = block->forward(h);
  return ops::reshape(h, {t, cfg_.d_t});
}

Tensor VisualFrontend::encode(const Tensor& video) const {
  return temporal_encode(project(spatial_encode(embed_tokens(tokenize(video)))));
}

Tensor VisualFrontend::encode(const media::VideoClip& clip) const { return encode(media::clip_to_tensor(clip)); }

}  // namespace lipspeech
