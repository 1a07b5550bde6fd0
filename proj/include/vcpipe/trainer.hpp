// Copyright (c) 2026 vcpipe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vcpipe/checkpoint.hpp"
#include "vcpipe/content.hpp"
#include "vcpipe/f0.hpp"
#include "vcpipe/losses.hpp"
#include "vcpipe/model.hpp"
#include "vcpipe/optimizer.hpp"

namespace vcpipe {

/// Run-level training knobs. Crops are `segment_frames` content frames long
/// (960 samples each) and always start on a frame boundary, so waveform and
/// feature windows describe the same audio exactly.
struct TrainConfig {
  AdamConfig adam;
  LossWeights weights;
  int epochs = 120;
  int batch_size = 16;
  int segment_frames = 8;
  uint64_t seed = 0;

  void validate() const {
    adam.validate();
    weights.validate();
    if (epochs < 1) throw ConfigError("trainer: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("trainer: batch_size must be >= 1");
    if (segment_frames < 1) throw ConfigError("trainer: segment_frames must be >= 1");
  }
};

/// One utterance, fully preprocessed: frozen content features, the
/// speaker-normalized pitch track, and the reference summary for the
/// embedder. Training reconstructs crops of `wave` from these.
struct TrainItem {
  std::string id;
  Waveform wave;
  ContentFeatures content;
  NormalizedF0 nf0;
  std::vector<float> spk_summary;
};

inline TrainItem prepare_item(const Waveform& w, LinguisticEncoder& enc, const F0Config& fcfg,
                              const MelConfig& spk_mel, std::string id = "") {
  if (w.sample_rate != kContentRate)
    throw ContractError("prepare_item: expected 24 kHz audio, got " +
                        std::to_string(w.sample_rate));
  TrainItem it;
  it.id = std::move(id);
  it.wave = w;
  it.content = extract_content(w, enc);
  it.nf0 = normalize_f0(extract_f0(w, fcfg));
  it.spk_summary = mel_time_mean(w, spk_mel);
  return it;
}

struct StepReport {
  int epoch = 0;
  long long step = 0;
  double loss_d = 0, loss_g = 0, rec = 0, advp = 0, fm = 0, kl = 0, lr = 0;
};

inline std::string format_step_line(const StepReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "step=%lld epoch=%d loss_d=%.6f loss_g=%.6f rec=%.6f advp=%.6f fm=%.6f "
                "kl=%.6f lr=%.8f",
                r.step, r.epoch, r.loss_d, r.loss_g, r.rec, r.advp, r.fm, r.kl, r.lr);
  return std::string(buf);
}

/// Alternating adversarial trainer. Each step runs the predictor once,
/// updates the discriminators on the detached output, then scores the same
/// output against the updated discriminators for the predictor update. The
/// content encoder never appears in either parameter set.
class Trainer {
 public:
  using LogSink = std::function<void(const std::string&)>;

  Trainer(VcModel& model, const TrainConfig& cfg, std::string ckpt_dir = "",
          std::string config_text = "", LogSink sink = nullptr)
      : model_(model),
        cfg_(cfg),
        ckpt_dir_(std::move(ckpt_dir)),
        config_text_(std::move(config_text)),
        sink_(std::move(sink)),
        rng_(cfg.seed),
        mc_rec_(model.cfg.rec_mel),
        gen_opt_(cfg.adam, model.predictor_params()),
        disc_opt_(cfg.adam, model.disc_params()) {
    cfg.validate();
  }

  long long steps() const { return gen_opt_.steps(); }
  double best_val() const { return best_val_; }
  std::mt19937_64& rng() { return rng_; }

  /// One alternating update on a batch of preprocessed items.
  StepReport train_step(const std::vector<const TrainItem*>& batch, int epoch) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    const int B = static_cast<int>(batch.size());
    const int S = cfg_.segment_frames;
    const int D = model_.cfg.content_dim;
    const int T = S * 960;
    const int F = S * 4;  // pitch frames per crop
    const int n_mels = model_.cfg.spk.n_mels;

    // crop offsets and embedding noise come from the trainer stream, so a
    // seeded run is reproducible sample-for-sample
    std::vector<int> offsets(B);
    for (int i = 0; i < B; ++i) {
      const TrainItem& it = *batch[i];
      if (it.content.dim != D)
        throw ContractError("train_step: item content width " + std::to_string(it.content.dim) +
                            " != model " + std::to_string(D));
      if (it.content.frames < S)
        throw ContractError("train_step: item '" + it.id + "' has " +
                            std::to_string(it.content.frames) + " frames, segment needs " +
                            std::to_string(S));
      if (static_cast<int>(it.spk_summary.size()) != n_mels)
        throw ContractError("train_step: bad speaker summary width for item '" + it.id + "'");
      std::uniform_int_distribution<int> pick(0, it.content.frames - S);
      offsets[i] = pick(rng_);
    }
    Tensor<float> noise(B, model_.cfg.spk.dim, 1);
    {
      std::normal_distribution<float> g(0.0f, 1.0f);
      for (auto& v : noise.v) v = g(rng_);
    }

    // assemble batch tensors from the crops
    Tensor<float> content_t(B, D, S), f0_t(B, 2, F), wave_t(B, 1, T), summ_t(B, n_mels, 1);
    const int mel_frames = mc_rec_.frames_for(static_cast<size_t>(T));
    Tensor<float> mel_t(B, model_.cfg.rec_mel.n_mels, mel_frames);
    std::vector<float> mel_buf;
    for (int i = 0; i < B; ++i) {
      const TrainItem& it = *batch[i];
      const int o = offsets[i];
      for (int c = 0; c < D; ++c) {
        float* row = content_t.row(i, c);
        for (int t = 0; t < S; ++t) row[t] = it.content.at(o + t, c);
      }
      for (int t = 0; t < F; ++t) {
        f0_t.row(i, 0)[t] = it.nf0.logf0[static_cast<size_t>(o) * 4 + t];
        f0_t.row(i, 1)[t] = it.nf0.voiced[static_cast<size_t>(o) * 4 + t];
      }
      const float* wav = it.wave.samples.data() + static_cast<size_t>(o) * 960;
      std::copy(wav, wav + T, wave_t.row(i, 0));
      std::copy(it.spk_summary.begin(), it.spk_summary.end(), summ_t.row(i, 0));
      mc_rec_.compute(wav, static_cast<size_t>(T), &mel_buf, nullptr);
      for (int m = 0; m < model_.cfg.rec_mel.n_mels; ++m) {
        float* row = mel_t.row(i, m);
        for (int f = 0; f < mel_frames; ++f)
          row[f] = mel_buf[static_cast<size_t>(f) * model_.cfg.rec_mel.n_mels + m];
      }
    }

    const double lr = scheduled_lr(cfg_.adam, epoch);

    // predictor forward, kept alive across the discriminator update
    Tape<float> gtape;
    Ctx<float> gcx(gtape, /*train_mode=*/true);
    int f0_feats = model_.f0_enc.apply(gcx, gtape.input(f0_t, false));
    int feats = gtape.concat_c(gtape.input(content_t, false), f0_feats);
    auto [mu, lv] = model_.spk.apply(gcx, gtape.input(summ_t, false));
    int emb = sample_embedding_node(gtape, mu, lv, noise);
    int fake = model_.gen.apply(gcx, feats, emb);

    // discriminator update on the detached output
    Tensor<float> fake_detached = gtape.val(fake);
    double loss_d;
    {
      Tape<float> dtape;
      Ctx<float> dcx(dtape, true);
      auto real_outs = model_.disc.apply(dcx, dtape.input(wave_t, false));
      auto fake_outs = model_.disc.apply(dcx, dtape.input(std::move(fake_detached), false));
      int dl = adv_disc_loss_node(dtape, real_outs, fake_outs);
      loss_d = dtape.val(dl).v[0];
      if (!std::isfinite(loss_d))
        throw TrainError("training diverged at step " + std::to_string(gen_opt_.steps() + 1) +
                         ": discriminator loss is not finite");
      dtape.backward(dl);
      disc_opt_.step(dcx, dtape, lr);
    }

    // predictor update against the refreshed discriminators; their weights
    // enter this tape as constants
    for (Param* p : disc_opt_.params()) p->trainable = false;
    std::vector<TapeDiscOut> fake_outs, real_outs;
    try {
      fake_outs = model_.disc.apply(gcx, fake);
      real_outs = model_.disc.apply(gcx, gtape.input(wave_t, false));
    } catch (...) {
      for (Param* p : disc_opt_.params()) p->trainable = true;
      throw;
    }
    for (Param* p : disc_opt_.params()) p->trainable = true;

    int rec = gtape.mean_abs_diff(gtape.logmel(fake, &mc_rec_), gtape.input(mel_t, false));
    int advp = adv_gen_loss_node(gtape, fake_outs);
    int fm = fm_loss_node(gtape, real_outs, fake_outs);
    int kl = kl_node(gtape, mu, lv);
    int total = total_predictor_loss_node(gtape, rec, advp, fm, kl, cfg_.weights);

    StepReport r;
    r.epoch = epoch;
    r.loss_d = loss_d;
    r.rec = gtape.val(rec).v[0];
    r.advp = gtape.val(advp).v[0];
    r.fm = gtape.val(fm).v[0];
    r.kl = gtape.val(kl).v[0];
    r.loss_g = gtape.val(total).v[0];
    r.lr = lr;
    if (!std::isfinite(r.loss_g))
      throw TrainError("training diverged at step " + std::to_string(gen_opt_.steps() + 1) +
                       ": rec=" + std::to_string(r.rec) + " advp=" + std::to_string(r.advp) +
                       " fm=" + std::to_string(r.fm) + " kl=" + std::to_string(r.kl));
    gtape.backward(total);
    gen_opt_.step(gcx, gtape, lr);
    r.step = gen_opt_.steps();
    return r;
  }

  /// Mean reconstruction loss over fixed (offset-zero, mean-embedding)
  /// crops — the checkpoint-selection criterion.
  double validate(const std::vector<TrainItem>& items) {
    if (items.empty()) throw EmptyInputError("validate: no items");
    double acc = 0.0;
    for (const TrainItem& it : items) acc += validation_rec(it);
    return acc / static_cast<double>(items.size());
  }

  /// Full schedule: shuffled batches each epoch, per-epoch checkpoints, best
  /// checkpoint selected by validation reconstruction loss.
  void run(const std::vector<TrainItem>& train, const std::vector<TrainItem>& val) {
    if (train.empty()) throw EmptyInputError("trainer: empty training set");
    std::vector<int> order(train.size());
    for (int epoch = start_epoch_; epoch < cfg_.epochs; ++epoch) {
      // shuffle from the identity each epoch: the visiting order then depends
      // only on the rng stream, so a resumed run reproduces it exactly
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng_);
      for (size_t at = 0; at < order.size(); at += cfg_.batch_size) {
        std::vector<const TrainItem*> batch;
        for (size_t i = at; i < std::min(order.size(), at + cfg_.batch_size); ++i)
          batch.push_back(&train[order[i]]);
        StepReport r = train_step(batch, epoch);
        if (sink_) sink_(format_step_line(r));
      }
      const double v = val.empty() ? validate(train) : validate(val);
      char line[96];
      std::snprintf(line, sizeof(line), "epoch=%d done val_rec=%.6f", epoch, v);
      if (sink_) sink_(line);
      if (v < best_val_) best_val_ = v;
      if (!ckpt_dir_.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.vcpk", epoch);
        save(ckpt_dir_ + "/" + name, epoch);
        if (v <= best_val_) save(ckpt_dir_ + "/best.vcpk", epoch);
      }
    }
  }

  /// Continue a run from checkpoint metadata (tensors are loaded by the
  /// caller into the model before constructing the trainer).
  void restore(const CheckpointMeta& meta) {
    start_epoch_ = meta.epoch + 1;
    gen_opt_.set_steps(meta.gen_steps);
    disc_opt_.set_steps(meta.disc_steps);
    best_val_ = meta.best_val;
    if (!meta.rng_state.empty()) {
      std::istringstream in(meta.rng_state);
      in >> rng_;
      if (!in) throw IoError("trainer: bad stored rng state");
    }
  }

  void save(const std::string& path, int epoch) {
    CheckpointMeta meta;
    meta.config_hash = fnv1a64(config_text_);
    meta.epoch = epoch;
    meta.gen_steps = gen_opt_.steps();
    meta.disc_steps = disc_opt_.steps();
    meta.best_val = best_val_;
    meta.config_text = config_text_;
    std::ostringstream ss;
    ss << rng_;
    meta.rng_state = ss.str();
    save_checkpoint(path, meta, model_.all_params());
  }

 private:
  double validation_rec(const TrainItem& it) {
    const int S = cfg_.segment_frames;
    const int D = model_.cfg.content_dim;
    if (it.content.frames < S || it.content.dim != D)
      throw ContractError("validate: item '" + it.id + "' does not fit the segment");
    const int T = S * 960;
    Tensor<float> content_t(1, D, S), f0_t(1, 2, S * 4), summ_t(1, model_.cfg.spk.n_mels, 1);
    for (int c = 0; c < D; ++c)
      for (int t = 0; t < S; ++t) content_t.row(0, c)[t] = it.content.at(t, c);
    for (int t = 0; t < S * 4; ++t) {
      f0_t.row(0, 0)[t] = it.nf0.logf0[t];
      f0_t.row(0, 1)[t] = it.nf0.voiced[t];
    }
    std::copy(it.spk_summary.begin(), it.spk_summary.end(), summ_t.row(0, 0));

    Tape<float> tape;
    Ctx<float> cx(tape, /*train_mode=*/false);
    int f0_feats = model_.f0_enc.apply(cx, tape.input(std::move(f0_t), false));
    int feats = tape.concat_c(tape.input(std::move(content_t), false), f0_feats);
    auto [mu, lv] = model_.spk.apply(cx, tape.input(std::move(summ_t), false));
    (void)lv;  // validation scores with the posterior mean
    int fake = model_.gen.apply(cx, feats, mu);

    const int mel_frames = mc_rec_.frames_for(static_cast<size_t>(T));
    Tensor<float> mel_t(1, model_.cfg.rec_mel.n_mels, mel_frames);
    std::vector<float> mel_buf;
    mc_rec_.compute(it.wave.samples.data(), static_cast<size_t>(T), &mel_buf, nullptr);
    for (int m = 0; m < model_.cfg.rec_mel.n_mels; ++m)
      for (int f = 0; f < mel_frames; ++f)
        mel_t.row(0, m)[f] = mel_buf[static_cast<size_t>(f) * model_.cfg.rec_mel.n_mels + m];
    int rec = tape.mean_abs_diff(tape.logmel(fake, &mc_rec_), tape.input(std::move(mel_t), false));
    return tape.val(rec).v[0];
  }

  VcModel& model_;
  TrainConfig cfg_;
  std::string ckpt_dir_;
  std::string config_text_;
  LogSink sink_;
  std::mt19937_64 rng_;
  MelComputer<float> mc_rec_;
  Adam gen_opt_;
  Adam disc_opt_;
  int start_epoch_ = 0;
  double best_val_ = std::numeric_limits<double>::infinity();
};

}  // namespace vcpipe
