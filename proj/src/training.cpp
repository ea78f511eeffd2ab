// Copyright 2026 The LipSpeech Authors.
// Licensed under the Apache License, Version 2.0.

#include "lipspeech/training.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <numeric>

#include "lipspeech/error.hpp"
#include "lipspeech/losses.hpp"
#include "lipspeech/ops.hpp"

namespace lipspeech {

namespace {

constexpr std::uint64_t kAugmentStream = 0x61756775ULL;
constexpr std::uint64_t kWindowStream = 0x77696e64ULL;
constexpr std::uint64_t kOrderStream = 0x6f726472ULL;
constexpr Index kMovingAverage = 100;

media::VideoClip resize_clip(const media::VideoClip& clip, Index size) {
  const auto& f = clip.frames.front();
  if (f.height == size && f.width == size) return clip;
  std::vector<media::CropBox> boxes;
  for (const auto& frame : clip.frames) boxes.push_back(media::full_frame_box(frame));
  return media::load_clip(clip.frames, boxes, size, clip.fps, clip.source_id);
}

bool augments(const media::AugmentPolicy& p) { return p.flip_probability > 0 || p.crop_probability > 0; }

Tensor example_video(const TrainingExample& ex, const PipelineConfig& cfg, std::uint64_t seed, Index draw) {
  if (!augments(cfg.augment)) return ex.video;
  Rng rng(mix_seed(seed ^ kAugmentStream, static_cast<std::uint64_t>(draw)));
  return media::clip_to_tensor(media::augment(ex.clip, rng, cfg.augment));
}

/// Epoch-wise shuffled example indices.
class Order {
 public:
  Order(Index n, Index batch, std::uint64_t seed) : n_(n), batch_(batch), seed_(seed) {}
  Index steps_per_epoch() const { return (n_ + batch_ - 1) / batch_; }
  Index epoch(Index step) const { return step / steps_per_epoch(); }
  Index pick(Index step, Index j) {
    const Index e = epoch(step);
    if (e != cached_epoch_) {
      perm_.resize(static_cast<std::size_t>(n_));
      std::iota(perm_.begin(), perm_.end(), Index{0});
      Rng rng(mix_seed(seed_ ^ kOrderStream, static_cast<std::uint64_t>(e)));
      std::shuffle(perm_.begin(), perm_.end(), rng);
      cached_epoch_ = e;
    }
    const Index within = (step % steps_per_epoch()) * batch_ + j;
    return perm_[static_cast<std::size_t>(within % n_)];
  }

 private:
  Index n_, batch_;
  std::uint64_t seed_;
  Index cached_epoch_ = -1;
  std::vector<Index> perm_;
};

nn::NamedTensors with_buffers(const nn::Module& m) {
  nn::NamedTensors all = m.named_parameters();
  for (auto& b : m.named_buffers()) all.push_back(b);
  return all;
}

void note(TrainResult& r, const TrainOptions& opts, const std::string& msg) {
  if (std::find(r.notes.begin(), r.notes.end(), msg) != r.notes.end()) return;
  r.notes.push_back(msg);
  if (opts.verbose) std::cerr << "note: " << msg << "\n";
}

std::filesystem::path checkpoint_path(const TrainOptions& opts, int stage, const std::string& tag) {
  return opts.output_dir / ("stage" + std::to_string(stage) + "_" + tag + ".ckpt");
}

std::filesystem::path loss_csv(const TrainOptions& opts, int stage) {
  if (opts.output_dir.empty()) return {};
  return opts.output_dir / ("stage" + std::to_string(stage) + "_loss.csv");
}

double mean_l1(const SpeechModel& model, std::span<const TrainingExample> data) {
  NoGradGuard no_grad;
  double acc = 0.0;
  for (const auto& ex : data) {
    Tensor pred = model.aux_mel(model.acoustic(ex.video, ex.clip.fps));
    const Index len = std::min(pred.dim(0), ex.mel.dim(0));
    acc += losses::l1_loss(truncate_rows(pred, len), truncate_rows(ex.mel, len)).item();
  }
  return acc / static_cast<double>(data.size());
}

}  // namespace

// --- data ------------------------------------------------------------------------

TrainingExample make_example(const media::VideoClip& clip, const media::Waveform& audio, const PipelineConfig& cfg) {
  TrainingExample ex;
  ex.clip = resize_clip(clip, cfg.frontend.frame_size);
  ex.video = media::clip_to_tensor(ex.clip);
  ex.mel = media::extract_mel(audio, cfg.mel).to_tensor();
  ex.audio = Tensor({audio.size()}, audio.samples);
  ex.id = clip.source_id;
  return ex;
}

std::vector<TrainingExample> load_examples(std::span<const std::string> dirs, const PipelineConfig& cfg,
                                           const TrainPlan& plan, std::vector<std::string>* warnings) {
  std::vector<TrainingExample> out;
  for (const auto& dir : dirs) {
    const std::filesystem::path root(dir);
    media::VideoClip clip = media::read_clip_directory(root / "frames", cfg.video_fps);
    clip.source_id = root.filename().string();
    media::Waveform audio = media::read_wav(root / "audio.wav", cfg.mel.sample_rate);
    media::WindowedDataset ds =
        media::window_dataset(clip, audio, plan.sample_seconds, plan.sample_seconds, cfg.mel);
    if (warnings) warnings->insert(warnings->end(), ds.warnings.begin(), ds.warnings.end());
    if (ds.samples.empty()) {
      if (warnings) warnings->push_back(dir + ": shorter than one sample window, using the whole clip");
      out.push_back(make_example(clip, audio, cfg));
      continue;
    }
    for (auto& s : ds.samples) {
      s.clip.source_id = clip.source_id + "@" + std::to_string(s.frame_offset);
      out.push_back(make_example(s.clip, s.audio, cfg));
    }
  }
  return out;
}

// --- optimizer ---------------------------------------------------------------------

Adam::Adam(nn::NamedTensors params, const TrainPlan& plan)
    : params_(std::move(params)),
      lr_(plan.lr),
      beta1_(plan.beta1),
      beta2_(plan.beta2),
      eps_(plan.eps),
      weight_decay_(plan.optimizer == "adamw" ? plan.weight_decay : 0.0) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (weight_decay_ > 0) w[j] -= lr_ * weight_decay_ * w[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

void Adam::save(Archive& archive, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& [name, t] = params_[i];
    archive.tensors.emplace_back(prefix + "m." + name, Tensor(t.shape(), m_[i]));
    archive.tensors.emplace_back(prefix + "v." + name, Tensor(t.shape(), v_[i]));
  }
  archive.meta[prefix + "t"] = std::to_string(t_);
}

void Adam::load(const Archive& archive, const std::string& prefix) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_[i].first;
    const Tensor* m = archive.find(prefix + "m." + name);
    const Tensor* v = archive.find(prefix + "v." + name);
    if (!m || !v || m->numel() != params_[i].second.numel())
      throw ConfigError("checkpoint lacks optimizer state for " + name);
    m_[i] = m->values();
    v_[i] = v->values();
  }
  auto it = archive.meta.find(prefix + "t");
  if (it == archive.meta.end()) throw ConfigError("checkpoint lacks optimizer step count");
  t_ = std::stoll(it->second);
}

// --- loss log -----------------------------------------------------------------------

LossLog::LossLog(const std::filesystem::path& csv) {
  if (csv.empty()) return;
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  const bool fresh = !std::filesystem::exists(csv) || std::filesystem::file_size(csv) == 0;
  out_ = std::make_unique<std::ofstream>(csv, std::ios::app);
  if (!*out_) throw InputError("cannot open loss log " + csv.string());
  if (fresh) *out_ << "step,component,value\n";
  out_->precision(17);
}

void LossLog::add(Index step, const std::string& component, double value) {
  records_.push_back({step, component, value});
  if (out_) *out_ << step << ',' << component << ',' << value << '\n';
}

std::vector<double> LossLog::series(const std::string& component) const {
  std::vector<double> out;
  for (const auto& r : records_)
    if (r.component == component) out.push_back(r.value);
  return out;
}

std::vector<double> TrainResult::series(const std::string& component) const {
  std::vector<double> out;
  for (const auto& r : losses)
    if (r.component == component) out.push_back(r.value);
  return out;
}

// --- windows ------------------------------------------------------------------------

SampledWindow window_at(const Tensor& acoustic, const Tensor& audio, Index start, Index frames, Index hop) {
  if (start < 0 || frames < 1 || start + frames > acoustic.dim(0) || (start + frames) * hop > audio.dim(0))
    throw InputError("window [" + std::to_string(start) + ", " + std::to_string(start + frames) +
                     ") exceeds the available sequence");
  SampledWindow w;
  w.start = start;
  w.frames = frames;
  w.sample_start = start * hop;
  w.acoustic = ops::slice(acoustic, 0, start, start + frames);
  w.audio = ops::slice(audio, 0, start * hop, (start + frames) * hop);
  return w;
}

SampledWindow sample_window(const Tensor& acoustic, const Tensor& audio, Index frames, Index hop, Rng& rng) {
  const Index usable = std::min(acoustic.dim(0), audio.dim(0) / hop);
  if (usable < 1) throw InputError("sequence too short for any window");
  if (usable < frames) {
    SampledWindow w = window_at(acoustic, audio, 0, usable, hop);
    w.fell_back = true;
    return w;
  }
  std::uniform_int_distribution<Index> pick(0, usable - frames);
  return window_at(acoustic, audio, pick(rng), frames, hop);
}

// --- ablations ------------------------------------------------------------------------

TrainPlan effective_plan(const PipelineConfig& cfg, int stage, Ablation ablation) {
  TrainPlan plan = cfg.plan(stage);
  plan.ablation = ablation;
  plan.validate(cfg.mel.frame_rate());
  if (ablation == Ablation::skip_stage1) plan.freeze_upstream = false;
  return plan;
}

std::unique_ptr<SpeechModel> apply_ablation(const PipelineConfig& cfg, Ablation mode, std::uint64_t seed) {
  return std::make_unique<SpeechModel>(cfg, mode, seed);
}

// --- archives ------------------------------------------------------------------------

Archive model_archive(const SpeechModel& model, const Discriminators* disc, Index step, int stage) {
  Archive a;
  a.config_json = to_json(model.config());
  a.step = step;
  a.stage = stage;
  a.meta["ablation"] = ablation_name(model.ablation());
  a.append("model.", with_buffers(model));
  if (disc) a.append("disc.", with_buffers(*disc));
  return a;
}

void load_model(SpeechModel& model, const Archive& archive) { restore(with_buffers(model), archive, "model."); }

std::unique_ptr<SpeechModel> model_from_archive(const Archive& archive) {
  if (archive.config_json.empty()) throw ConfigError("checkpoint has no embedded config");
  PipelineConfig cfg = parse_config(archive.config_json);
  auto it = archive.meta.find("ablation");
  const Ablation ablation = it == archive.meta.end() ? Ablation::none : parse_ablation(it->second);
  auto model = std::make_unique<SpeechModel>(cfg, ablation, 0);
  load_model(*model, archive);
  return model;
}

// --- stage 1 -----------------------------------------------------------------------------

TrainResult train_stage1(SpeechModel& model, std::span<const TrainingExample> data, const PipelineConfig& cfg,
                         const TrainOptions& opts) {
  const TrainPlan plan = effective_plan(cfg, 1, model.ablation());
  if (data.empty()) throw InputError("stage 1: empty training dataset");

  Adam opt(model.upstream_parameters(), plan);
  TrainResult result;
  Index step = 0;
  if (!opts.resume.empty()) {
    Archive a = load_archive(opts.resume);
    if (a.stage != 1) throw ConfigError("resume checkpoint is not a stage-1 checkpoint");
    load_model(model, a);
    opt.load(a, "optim.");
    step = a.step;
  }
  result.first_step = step;
  LossLog log(loss_csv(opts, 1));
  Order order(static_cast<Index>(data.size()), plan.batch_size, plan.seed);
  double best_validation = INFINITY;

  auto save = [&](const std::string& tag, Index at) {
    if (opts.output_dir.empty()) return std::filesystem::path{};
    Archive a = model_archive(model, nullptr, at, 1);
    opt.save(a, "optim.");
    const auto path = checkpoint_path(opts, 1, tag);
    save_archive(path, a);
    return path;
  };

  for (; step < plan.steps; ++step) {
    opt.set_lr(plan.lr * std::pow(plan.lr_decay, static_cast<double>(order.epoch(step))));
    opt.zero_grad();
    double total = 0.0, ssim = 0.0, l1 = 0.0;
    const double scale = 1.0 / static_cast<double>(plan.batch_size);
    for (Index j = 0; j < plan.batch_size; ++j) {
      const TrainingExample& ex = data[static_cast<std::size_t>(order.pick(step, j))];
      Tensor video = example_video(ex, cfg, plan.seed, step * plan.batch_size + j);
      Tensor pred = model.aux_mel(model.acoustic(video, ex.clip.fps));
      Tensor target = ex.mel;
      if (pred.dim(0) != target.dim(0)) {
        note(result, opts,
             ex.id + ": aligned length " + std::to_string(pred.dim(0)) + " vs mel length " +
                 std::to_string(target.dim(0)) + ", truncated to the shorter");
        const Index len = std::min(pred.dim(0), target.dim(0));
        pred = truncate_rows(pred, len);
        target = truncate_rows(target, len);
      }
      losses::Stage1Loss loss = losses::stage1_loss(pred, target, cfg.stage1_weights);
      ops::mul_scalar(loss.total, scale).backward();
      total += loss.total.item() * scale;
      ssim += loss.ssim.item() * scale;
      l1 += loss.l1.item() * scale;
    }
    opt.step();

    const Index done = step + 1;
    log.add(done, "ssim", ssim);
    log.add(done, "l1", l1);
    log.add(done, "total", total);
    if (opts.verbose && plan.log_every > 0 && done % plan.log_every == 0)
      std::cerr << "stage 1 step " << done << "  total " << total << "  ssim " << ssim << "  l1 " << l1 << "\n";
    if (!opts.output_dir.empty() && plan.checkpoint_every > 0 && done % plan.checkpoint_every == 0) {
      save("step" + std::to_string(done), done);
      if (!opts.validation.empty()) {
        const double v = mean_l1(model, opts.validation);
        log.add(done, "validation_l1", v);
        if (v < best_validation) {
          best_validation = v;
          save("best", done);
        }
      }
    }
    if (opts.on_step) opts.on_step(done);
    if (plan.stop_l1_below > 0 && l1 < plan.stop_l1_below) {
      result.stopped_early = true;
      ++step;
      break;
    }
  }
  result.last_step = step;
  result.final_checkpoint = save("final", step);
  result.losses = log.records();
  return result;
}

// --- stage 2 -----------------------------------------------------------------------------

TrainResult train_stage2(SpeechModel& model, Discriminators& disc, std::span<const TrainingExample> data,
                         const PipelineConfig& cfg, const TrainOptions& opts) {
  const TrainPlan plan = effective_plan(cfg, 2, model.ablation());
  if (data.empty()) throw InputError("stage 2: empty training dataset");
  if (!model.has_generator()) throw ConfigError("stage 2 needs a waveform generator");

  TrainResult result;
  Index step = 0;
  Archive resume;
  if (!opts.resume.empty()) {
    resume = load_archive(opts.resume);
    if (resume.stage != 2) throw ConfigError("resume checkpoint is not a stage-2 checkpoint");
    load_model(model, resume);
    restore(with_buffers(disc), resume, "disc.");
    step = resume.step;
  } else if (plan.copy_projection) {
    model.copy_projection_from_aux();
  }

  nn::NamedTensors g_params = model.generator_parameters();
  if (!plan.freeze_upstream)
    for (auto& p : model.upstream_parameters()) g_params.push_back(p);
  Adam g_opt(g_params, plan);
  Adam d_opt(disc.named_parameters(), plan);
  if (!opts.resume.empty()) {
    g_opt.load(resume, "optim.g.");
    d_opt.load(resume, "optim.d.");
  }
  result.first_step = step;

  LossLog log(loss_csv(opts, 2));
  Order order(static_cast<Index>(data.size()), plan.batch_size, plan.seed);
  const Index window = plan.window_frames(cfg.mel.frame_rate());
  const Index hop = cfg.mel.hop;
  const bool cache_upstream = plan.freeze_upstream && !augments(cfg.augment);
  std::vector<Tensor> cache(data.size());
  std::deque<double> recent;
  double recent_sum = 0.0, baseline = 0.0;

  auto save = [&](const std::string& tag, Index at) {
    if (opts.output_dir.empty()) return std::filesystem::path{};
    Archive a = model_archive(model, &disc, at, 2);
    g_opt.save(a, "optim.g.");
    d_opt.save(a, "optim.d.");
    const auto path = checkpoint_path(opts, 2, tag);
    save_archive(path, a);
    return path;
  };

  for (; step < plan.steps; ++step) {
    const double lr = plan.lr * std::pow(plan.lr_decay, static_cast<double>(order.epoch(step)));
    g_opt.set_lr(lr);
    d_opt.set_lr(lr);
    const double scale = 1.0 / static_cast<double>(plan.batch_size);

    std::vector<Tensor> fakes, reals;
    for (Index j = 0; j < plan.batch_size; ++j) {
      const Index draw = step * plan.batch_size + j;
      const std::size_t idx = static_cast<std::size_t>(order.pick(step, j));
      const TrainingExample& ex = data[idx];
      Tensor acoustic;
      if (plan.freeze_upstream) {
        NoGradGuard no_grad;
        if (cache_upstream && cache[idx].defined()) {
          acoustic = cache[idx];
        } else {
          acoustic = model.acoustic(example_video(ex, cfg, plan.seed, draw), ex.clip.fps);
          if (cache_upstream) cache[idx] = acoustic;
        }
      } else {
        acoustic = model.acoustic(example_video(ex, cfg, plan.seed, draw), ex.clip.fps);
      }
      Rng rng(mix_seed(plan.seed ^ kWindowStream, static_cast<std::uint64_t>(draw)));
      SampledWindow w = sample_window(acoustic, ex.audio, window, hop, rng);
      if (w.fell_back)
        note(result, opts, ex.id + ": shorter than the " + std::to_string(window) + "-frame window, using all " +
                               std::to_string(w.frames) + " frames");
      fakes.push_back(model.waveform(w.acoustic));
      reals.push_back(w.audio);
    }

    // Discriminator update on detached generator output.
    d_opt.zero_grad();
    double d_total = 0.0;
    for (std::size_t j = 0; j < fakes.size(); ++j) {
      DiscriminatorOutput real_out = disc.discriminate(reals[j]);
      DiscriminatorOutput fake_out = disc.discriminate(fakes[j].detach());
      losses::AdversarialLoss adv = losses::adversarial_losses(real_out.scores, fake_out.scores);
      ops::mul_scalar(adv.discriminator, scale).backward();
      d_total += adv.discriminator.item() * scale;
    }
    d_opt.step();

    g_opt.zero_grad();
    double g_total = 0.0, adv_g = 0.0, mel = 0.0, fm = 0.0;
    for (std::size_t j = 0; j < fakes.size(); ++j) {
      DiscriminatorOutput real_out;
      {
        NoGradGuard no_grad;
        real_out = disc.discriminate(reals[j]);
      }
      DiscriminatorOutput fake_out = disc.discriminate(fakes[j]);
      losses::Stage2Loss l = losses::stage2_losses(real_out, fake_out, fakes[j], reals[j], cfg.mel, cfg.stage2_weights);
      ops::mul_scalar(l.generator_total, scale).backward();
      g_total += l.generator_total.item() * scale;
      adv_g += l.adversarial_g.item() * scale;
      mel += l.mel.item() * scale;
      fm += l.feature_matching.item() * scale;
    }
    g_opt.step();

    const Index done = step + 1;
    log.add(done, "adv_g", adv_g);
    log.add(done, "mel", mel);
    log.add(done, "fm", fm);
    log.add(done, "g_total", g_total);
    log.add(done, "d_total", d_total);
    if (opts.verbose && plan.log_every > 0 && done % plan.log_every == 0)
      std::cerr << "stage 2 step " << done << "  g " << g_total << "  d " << d_total << "  mel " << mel << "  fm " << fm
                << "\n";
    if (!opts.output_dir.empty() && plan.checkpoint_every > 0 && done % plan.checkpoint_every == 0) {
      save("step" + std::to_string(done), done);
    }
    if (opts.on_step) opts.on_step(done);

    recent.push_back(mel);
    recent_sum += mel;
    if (static_cast<Index>(recent.size()) > kMovingAverage) {
      recent_sum -= recent.front();
      recent.pop_front();
    }
    if (done - result.first_step == kMovingAverage) baseline = recent_sum / kMovingAverage;
    if (plan.stop_mel_ratio > 0 && baseline > 0 && done - result.first_step > kMovingAverage &&
        recent_sum / kMovingAverage <= plan.stop_mel_ratio * baseline) {
      result.stopped_early = true;
      ++step;
      break;
    }
  }
  result.last_step = step;
  result.final_checkpoint = save("final", step);
  result.losses = log.records();
  return result;
}

// --- CLI entry ------------------------------------------------------------------------------

TrainResult run_training(PipelineConfig cfg, int stage, Ablation ablation, const std::string& resume) {
  const TrainPlan plan = effective_plan(cfg, stage, ablation);
  std::vector<std::string> warnings;
  std::vector<TrainingExample> train = load_examples(cfg.data.train, cfg, plan, &warnings);
  std::vector<TrainingExample> validation = load_examples(cfg.data.validation, cfg, plan, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (train.empty()) throw InputError("no training data: set data.train to preprocessed directories");

  TrainOptions opts;
  opts.output_dir = cfg.data.output_dir;
  opts.validation = validation;
  opts.resume = resume;
  opts.verbose = true;

  auto model = apply_ablation(cfg, ablation, plan.seed);
  if (stage == 1) return train_stage1(*model, train, cfg, opts);

  Rng disc_rng(mix_seed(plan.seed, 2));
  Discriminators disc(cfg.discriminator, disc_rng);
  if (resume.empty() && ablation != Ablation::skip_stage1) {
    if (plan.init_checkpoint.empty())
      throw ConfigError("stage 2 needs stage2.init_checkpoint (a stage-1 checkpoint) unless ablation is skip_stage1");
    Archive a = load_archive(plan.init_checkpoint);
    auto it = a.meta.find("ablation");
    const std::string saved = it == a.meta.end() ? "none" : it->second;
    if (saved != ablation_name(ablation))
      throw ConfigError("stage-1 checkpoint was trained with ablation " + saved + ", not " + ablation_name(ablation));
    load_model(*model, a);
  }
  return train_stage2(*model, disc, train, cfg, opts);
}

}  // namespace lipspeech
