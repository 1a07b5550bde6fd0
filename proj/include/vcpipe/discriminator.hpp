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

#include <random>
#include <string>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/nn.hpp"

namespace vcpipe {

/// Discriminator ensemble configuration: one period discriminator per entry
/// of `periods` (prime strides over phase-split waveforms) plus `msd_scales`
/// scale discriminators over successively average-pooled waveforms.
struct DiscConfig {
  std::vector<int> periods = {2, 3, 5, 7, 11};
  std::vector<int> mpd_channels = {32, 128, 512, 1024};
  int msd_scales = 3;
  std::vector<int> msd_channels = {32, 128, 512, 1024};
  std::vector<int> msd_kernels = {15, 21, 21, 5};
  float slope = 0.1f;
  int min_input = 960;  // shortest waveform the deepest branch can score

  void validate() const {
    if (periods.empty() || msd_scales < 1) throw ConfigError("disc: empty ensemble");
    for (int p : periods)
      if (p < 2) throw ConfigError("disc: periods must be >= 2");
    if (msd_channels.size() != msd_kernels.size())
      throw ConfigError("disc: msd channel/kernel lists must match");
    for (int k : msd_kernels)
      if (k % 2 == 0) throw ConfigError("disc: msd kernels must be odd");
    if (mpd_channels.empty()) throw ConfigError("disc: empty mpd channel list");
    if (min_input < 16) throw ConfigError("disc: min_input too small");
  }
};

/// One sub-discriminator's tape handles: post-activation hidden maps plus the
/// final one-channel map whose entries are the local realness scores.
struct TapeDiscOut {
  std::vector<int> fmaps;
  int final_map = -1;
};

/// Inference-side view of one sub-discriminator: the mean of the final map
/// and the flattened feature maps.
struct DiscriminatorOutput {
  double score = 0.0;
  std::vector<std::vector<float>> feature_maps;
};

/// Multi-period + multi-scale discriminator ensemble. Period branches share
/// weights across phases (the split phases ride the batch axis); scale
/// branches see the raw waveform and its pooled-down copies.
class DiscEnsemble {
 public:
  DiscEnsemble() = default;

  DiscEnsemble(const DiscConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg.validate();
    mpds_.resize(cfg.periods.size());
    for (size_t i = 0; i < cfg.periods.size(); ++i) {
      auto& d = mpds_[i];
      d.period = cfg.periods[i];
      const std::string base = "disc.p" + std::to_string(d.period);
      int ch = 1;
      d.convs.resize(cfg.mpd_channels.size());
      for (size_t j = 0; j < cfg.mpd_channels.size(); ++j) {
        d.convs[j].init(base + ".c" + std::to_string(j), ch, cfg.mpd_channels[j], 5, 3, 1, 2, 2,
                        PadMode::kZero, true, rng, fan_in_std(ch * 5));
        ch = cfg.mpd_channels[j];
      }
      d.post.init(base + ".post", ch, 1, 3, 1, 1, 1, 1, PadMode::kZero, true, rng,
                  fan_in_std(ch * 3));
    }
    msds_.resize(cfg.msd_scales);
    for (int s = 0; s < cfg.msd_scales; ++s) {
      auto& d = msds_[s];
      const std::string base = "disc.s" + std::to_string(s);
      int ch = 1;
      d.convs.resize(cfg.msd_kernels.size());
      for (size_t j = 0; j < cfg.msd_kernels.size(); ++j) {
        const int k = cfg.msd_kernels[j];
        // interior wide-kernel layers stride down by 4; edges keep rate
        const int stride = (j > 0 && j + 1 < cfg.msd_kernels.size() && k >= 15) ? 4 : 1;
        d.convs[j].init(base + ".c" + std::to_string(j), ch, cfg.msd_channels[j], k, stride, 1,
                        k / 2, k / 2, PadMode::kZero, true, rng, fan_in_std(ch * k));
        ch = cfg.msd_channels[j];
      }
      d.post.init(base + ".post", ch, 1, 3, 1, 1, 1, 1, PadMode::kZero, true, rng,
                  fan_in_std(ch * 3));
    }
  }

  const DiscConfig& config() const { return cfg_; }
  int count() const { return static_cast<int>(mpds_.size() + msds_.size()); }

  /// wave: [N, 1, T] with T >= min_input. Returns one entry per
  /// sub-discriminator, periods first, then scales coarse to fine.
  template <typename T>
  std::vector<TapeDiscOut> apply(Ctx<T>& cx, int wave) {
    // copy the dims up front: pushing ops below may relocate tape storage
    const int wc = cx.tape.val(wave).c;
    const int wt = cx.tape.val(wave).t;
    if (wc != 1) throw ContractError("disc: expected a single-channel waveform");
    if (wt < cfg_.min_input)
      throw ContractError("disc: waveform of " + std::to_string(wt) +
                          " samples is below the minimum of " + std::to_string(cfg_.min_input));
    const T slope = static_cast<T>(cfg_.slope);
    std::vector<TapeDiscOut> outs;
    outs.reserve(count());
    for (auto& d : mpds_) {
      const int rem = wt % d.period;
      int x = wave;
      if (rem != 0) x = cx.tape.pad1d(x, 0, d.period - rem, PadMode::kReflect);
      x = cx.tape.phase_split(x, d.period);
      TapeDiscOut o = run_branch(cx, d, x, slope);
      // phases ride the batch axis through the convs; fold them back so the
      // final map keeps one row per input item and per-item score reductions
      // see the whole map
      o.final_map = cx.tape.merge_rows(o.final_map, d.period);
      o.fmaps.back() = o.final_map;
      outs.push_back(std::move(o));
    }
    int x = wave;
    for (auto& d : msds_) {
      TapeDiscOut o = run_branch(cx, d, x, slope);
      outs.push_back(std::move(o));
      // next scale sees a half-rate copy
      x = cx.tape.avg_pool1d(cx.tape.pad1d(x, 1, 1, PadMode::kZero), 4, 2);
    }
    return outs;
  }

  void collect(std::vector<Param*>* ps) {
    for (auto& d : mpds_) {
      for (auto& c : d.convs) c.collect(ps);
      d.post.collect(ps);
    }
    for (auto& d : msds_) {
      for (auto& c : d.convs) c.collect(ps);
      d.post.collect(ps);
    }
  }

 private:
  struct Branch {
    int period = 0;  // unused for scale branches
    std::vector<Conv1d> convs;
    Conv1d post;
  };

  template <typename T>
  TapeDiscOut run_branch(Ctx<T>& cx, Branch& d, int x, T slope) {
    TapeDiscOut o;
    for (auto& c : d.convs) {
      x = cx.tape.leaky_relu(c.apply(cx, x), slope);
      o.fmaps.push_back(x);
    }
    o.final_map = d.post.apply(cx, x);
    o.fmaps.push_back(o.final_map);
    return o;
  }

  DiscConfig cfg_;
  std::vector<Branch> mpds_;
  std::vector<Branch> msds_;
};

/// Run the ensemble on one waveform without building gradients.
inline std::vector<DiscriminatorOutput> discriminate(const Waveform& w, DiscEnsemble& d) {
  if (w.samples.empty()) throw EmptyInputError("discriminate: empty waveform");
  Tensor<float> x(1, 1, static_cast<int>(w.samples.size()));
  std::copy(w.samples.begin(), w.samples.end(), x.v.begin());
  Tape<float> tape;
  Ctx<float> cx(tape, /*train_mode=*/false);
  auto outs = d.apply(cx, tape.input(std::move(x), false));
  std::vector<DiscriminatorOutput> res(outs.size());
  for (size_t i = 0; i < outs.size(); ++i) {
    const auto& fm = tape.val(outs[i].final_map);
    double acc = 0.0;
    for (float v : fm.v) acc += v;
    res[i].score = acc / static_cast<double>(fm.v.size());
    res[i].feature_maps.reserve(outs[i].fmaps.size());
    for (int id : outs[i].fmaps) res[i].feature_maps.push_back(tape.val(id).v);
  }
  return res;
}

}  // namespace vcpipe
