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

#include <cmath>
#include <complex>
#include <random>
#include <utility>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/fft.hpp"
#include "vcpipe/mel.hpp"
#include "vcpipe/nn.hpp"

namespace vcpipe {

/// Diagonal-Gaussian posterior over speaker embeddings.
struct SpeakerPosterior {
  std::vector<float> mu;
  std::vector<float> log_var;

  int dim() const { return static_cast<int>(mu.size()); }

  void validate() const {
    if (mu.size() != log_var.size()) throw ContractError("posterior: mu/log_var size mismatch");
    for (float v : mu)
      if (!std::isfinite(v)) throw ContractError("posterior: non-finite mu");
    for (float v : log_var)
      if (!std::isfinite(v)) throw ContractError("posterior: non-finite log_var");
  }
};

struct SpeakerEmbedding {
  std::vector<float> e;
};

enum class SampleMode { kTrain, kTest };

/// Reparameterized draw in training (e = mu + exp(log_var/2) * noise); the
/// posterior mean, bit-exactly, at test time.
inline SpeakerEmbedding sample_embedding(const SpeakerPosterior& p, SampleMode mode,
                                         const std::vector<float>& noise = {}) {
  p.validate();
  SpeakerEmbedding out;
  if (mode == SampleMode::kTest) {
    out.e = p.mu;
    return out;
  }
  if (noise.size() != p.mu.size())
    throw ContractError("sample_embedding: noise dimension " + std::to_string(noise.size()) +
                        " != " + std::to_string(p.mu.size()));
  out.e.resize(p.mu.size());
  for (size_t i = 0; i < p.mu.size(); ++i)
    out.e[i] = p.mu[i] + std::exp(0.5f * p.log_var[i]) * noise[i];
  return out;
}

/// D_KL( N(mu, diag(exp(log_var))) || N(0, I) ), summed over dimensions.
inline double kl_loss(const SpeakerPosterior& p) {
  p.validate();
  double acc = 0.0;
  for (size_t i = 0; i < p.mu.size(); ++i) {
    const double m = p.mu[i], lv = p.log_var[i];
    acc += m * m + std::exp(lv) - 1.0 - lv;
  }
  return 0.5 * acc;
}

/// Tape forms of the two ops above, for the training graph. mu/log_var are
/// [N, d, 1] nodes; noise enters as a constant.
template <typename T>
int sample_embedding_node(Tape<T>& tape, int mu, int log_var, const Tensor<T>& noise) {
  if (!tape.val(mu).same_shape(noise))
    throw ContractError("sample_embedding: noise shape mismatch");
  int sigma = tape.exp_(tape.affine_const(log_var, T(0.5), T(0)));
  return tape.add(mu, tape.mul(sigma, tape.input(noise, false)));
}

/// KL to the standard normal: sum over dimensions, mean over the batch.
template <typename T>
int kl_node(Tape<T>& tape, int mu, int log_var) {
  int sq = tape.mul(mu, mu);
  int ev = tape.exp_(log_var);
  int inner = tape.add(sq, tape.sub(ev, tape.affine_const(log_var, T(1), T(1))));
  return tape.mean_all(tape.affine_const(tape.sum_over_ct(inner), T(0.5), T(0)));
}

/// Time-mean of log-mel frames with circular (wrap-around) framing, so the
/// summary is invariant to concatenating the reference with itself. One
/// frame per hop, no padding frames.
inline std::vector<float> mel_time_mean(const Waveform& w, const MelConfig& cfg = {}) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw ContractError("speaker: waveform sample rate does not match mel config");
  const size_t len = w.samples.size();
  const int frames = static_cast<int>(len) / cfg.hop;
  if (frames < 1) throw ContractError("speaker: reference shorter than one mel frame");
  Fft<float> fft(cfg.n_fft);
  auto fbd = mel_filterbank(cfg);
  const int bins = cfg.n_fft / 2 + 1;
  const int off = (cfg.n_fft - cfg.win) / 2;
  std::vector<float> window(cfg.win);
  for (int i = 0; i < cfg.win; ++i)
    window[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.win));
  std::vector<std::complex<float>> buf(cfg.n_fft);
  std::vector<double> acc(cfg.n_mels, 0.0);
  std::vector<float> power(bins);
  for (int f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<float>(0, 0));
    const size_t base = static_cast<size_t>(f) * cfg.hop;
    for (int i = 0; i < cfg.win; ++i) {
      const float s = w.samples[(base + i) % len];
      buf[off + i] = std::complex<float>(s * window[i], 0.0f);
    }
    fft.forward(buf.data());
    for (int b = 0; b < bins; ++b)
      power[b] = buf[b].real() * buf[b].real() + buf[b].imag() * buf[b].imag();
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double* fb = fbd.data() + static_cast<size_t>(m) * bins;
      double p = 0.0;
      for (int b = 0; b < bins; ++b) p += fb[b] * power[b];
      acc[m] += std::log(std::max(p, cfg.log_floor));
    }
  }
  std::vector<float> mean(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) mean[m] = static_cast<float>(acc[m] / frames);
  return mean;
}

struct SpeakerEmbedderConfig {
  int n_mels = 80;
  int hidden = 256;
  int dim = 128;
  int blocks = 5;
  float slope = 0.1f;
  float eps = 1e-5f;
  double min_reference_seconds = 0.5;
};

/// Residual fully-connected embedder over the mel time-mean: input projection,
/// five Linear -> norm -> leaky ReLU -> Linear blocks with additive skips,
/// then mu / log_var heads. Heads start small so the posterior opens near
/// N(0, I) and the KL term starts near zero.
class SpeakerEmbedder {
 public:
  SpeakerEmbedder() = default;

  SpeakerEmbedder(const SpeakerEmbedderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    in_.init("spk.in", cfg.n_mels, cfg.hidden, true, rng);
    blocks_.resize(cfg.blocks);
    for (int i = 0; i < cfg.blocks; ++i) {
      const std::string base = "spk.block" + std::to_string(i);
      blocks_[i].a.init(base + ".a", cfg.hidden, cfg.hidden, true, rng);
      blocks_[i].b.init(base + ".b", cfg.hidden, cfg.hidden, true, rng);
    }
    mu_.init("spk.mu", cfg.hidden, cfg.dim, true, rng);
    mu_.reinit_small(rng, 1e-3f);
    logvar_.init("spk.logvar", cfg.hidden, cfg.dim, true, rng);
    logvar_.reinit_small(rng, 1e-3f);
  }

  const SpeakerEmbedderConfig& config() const { return cfg_; }

  /// x: [N, n_mels, 1] -> (mu, log_var) nodes, each [N, dim, 1]
  template <typename T>
  std::pair<int, int> apply(Ctx<T>& cx, int x) {
    const T eps = static_cast<T>(cfg_.eps);
    const T slope = static_cast<T>(cfg_.slope);
    // log-mel means sit around -11..0; normalize before the stack
    int h = in_.apply(cx, cx.tape.feature_norm(x, eps));
    for (auto& blk : blocks_) {
      int r = h;
      h = blk.a.apply(cx, h);
      h = cx.tape.leaky_relu(cx.tape.feature_norm(h, eps), slope);
      h = blk.b.apply(cx, h);
      h = cx.tape.add(h, r);
    }
    return {mu_.apply(cx, h), logvar_.apply(cx, h)};
  }

  /// Inference path: mel summary -> posterior on a throwaway tape.
  SpeakerPosterior embed(const Waveform& reference, const MelConfig& mcfg = {}) {
    const size_t min_samples =
        static_cast<size_t>(cfg_.min_reference_seconds * mcfg.sample_rate);
    if (reference.samples.size() < min_samples)
      throw ContractError("speaker: reference shorter than " +
                          std::to_string(cfg_.min_reference_seconds) + " s");
    std::vector<float> summary = mel_time_mean(reference, mcfg);
    Tensor<float> x(1, cfg_.n_mels, 1);
    std::copy(summary.begin(), summary.end(), x.v.begin());
    Tape<float> tape;
    Ctx<float> cx(tape, /*train_mode=*/false);
    auto [mu, lv] = apply(cx, tape.input(std::move(x), false));
    SpeakerPosterior post;
    post.mu.assign(tape.val(mu).v.begin(), tape.val(mu).v.end());
    post.log_var.assign(tape.val(lv).v.begin(), tape.val(lv).v.end());
    post.validate();
    return post;
  }

  void collect(std::vector<Param*>* ps) {
    in_.collect(ps);
    for (auto& blk : blocks_) {
      blk.a.collect(ps);
      blk.b.collect(ps);
    }
    mu_.collect(ps);
    logvar_.collect(ps);
  }

 private:
  struct Block {
    Linear a, b;
  };
  SpeakerEmbedderConfig cfg_;
  Linear in_;
  std::vector<Block> blocks_;
  Linear mu_, logvar_;
};

inline SpeakerPosterior embed_speaker(const Waveform& reference, SpeakerEmbedder& emb,
                                      const MelConfig& mcfg = {}) {
  return emb.embed(reference, mcfg);
}

}  // namespace vcpipe
