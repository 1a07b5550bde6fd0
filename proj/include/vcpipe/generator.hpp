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

#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/nn.hpp"
#include "vcpipe/speaker.hpp"

namespace vcpipe {

/// Waveform generator configuration. The upsampling factors must multiply to
/// 960 samples per 40 ms input frame; the final convolution carries no bias.
struct GeneratorConfig {
  int in_channels = 320;  // content dim + pitch-feature channels
  int cond_dim = 128;     // speaker embedding size
  int base_channels = 512;
  std::vector<int> upsample = {10, 8, 4, 3};
  std::vector<int> dilations = {1, 3, 5};  // residual blocks per stage
  int pre_kernel = 7;
  int res_kernel = 3;
  int out_kernel = 7;
  float slope = 0.1f;

  int hop() const {
    return std::accumulate(upsample.begin(), upsample.end(), 1, std::multiplies<int>());
  }

  void validate() const {
    if (hop() != 960) throw ConfigError("generator: upsample factors must multiply to 960");
    if (upsample.empty() || dilations.empty()) throw ConfigError("generator: empty stage lists");
    if (base_channels >> upsample.size() < 1)
      throw ConfigError("generator: base_channels too small for the stage count");
    if (pre_kernel % 2 == 0 || res_kernel % 2 == 0 || out_kernel % 2 == 0)
      throw ConfigError("generator: kernels must be odd");
    if (in_channels < 1 || cond_dim < 1) throw ConfigError("generator: bad channel counts");
  }
};

/// Upsampling stack: pre-conv, then one transposed convolution per factor
/// (kernel = 2 x stride), each followed by conditioned residual blocks, then
/// a bias-free output convolution into tanh. Every residual block applies a
/// per-channel scale and shift computed from the speaker embedding to its
/// input, so the speaker path touches every stage.
class Generator {
 public:
  Generator() = default;

  Generator(const GeneratorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg.validate();
    const int pk = cfg.pre_kernel;
    // zero padding here: a one-frame input is too short to reflect
    pre_.init("gen.pre", cfg.in_channels, cfg.base_channels, pk, 1, 1, pk / 2, pk / 2,
              PadMode::kZero, true, rng, fan_in_std(cfg.in_channels * pk));
    int ch = cfg.base_channels;
    stages_.resize(cfg.upsample.size());
    for (size_t s = 0; s < cfg.upsample.size(); ++s) {
      const int stride = cfg.upsample[s];
      const int cout = ch / 2;
      const std::string base = "gen.stage" + std::to_string(s);
      // kernel 2*stride with pads summing to stride: output length = in * stride,
      // and each output sample sums kernel/stride = 2 taps per input channel
      stages_[s].up.init(base + ".up", ch, cout, 2 * stride, stride, stride / 2,
                         stride - stride / 2, true, rng, fan_in_std(2 * ch));
      stages_[s].blocks.resize(cfg.dilations.size());
      for (size_t b = 0; b < cfg.dilations.size(); ++b) {
        auto& blk = stages_[s].blocks[b];
        const std::string bb = base + ".block" + std::to_string(b);
        const int rk = cfg.res_kernel;
        const int dil = cfg.dilations[b];
        blk.gamma.init(bb + ".gamma", cfg.cond_dim, cout, true, rng);
        blk.gamma.reinit_small(rng, 0.01f);
        blk.beta.init(bb + ".beta", cfg.cond_dim, cout, true, rng);
        blk.beta.reinit_small(rng, 0.01f);
        blk.c1.init(bb + ".c1", cout, cout, rk, 1, dil, dil * (rk / 2), dil * (rk / 2),
                    PadMode::kZero, true, rng, fan_in_std(cout * rk));
        blk.c2.init(bb + ".c2", cout, cout, rk, 1, 1, rk / 2, rk / 2, PadMode::kZero, true, rng,
                    fan_in_std(cout * rk));
      }
      ch = cout;
    }
    const int ok = cfg.out_kernel;
    out_.init("gen.out", ch, 1, ok, 1, 1, ok / 2, ok / 2, PadMode::kReflect,
              /*bias=*/false, rng, fan_in_std(ch * ok));
  }

  const GeneratorConfig& config() const { return cfg_; }

  /// feats: [N, in_channels, frames], embed: [N, cond_dim, 1]
  /// -> [N, 1, frames * 960], values in (-1, 1).
  template <typename T>
  int apply(Ctx<T>& cx, int feats, int embed) {
    // copy the dims up front: pushing ops below may relocate tape storage
    const int fn = cx.tape.val(feats).n, fc = cx.tape.val(feats).c, ft = cx.tape.val(feats).t;
    const int en = cx.tape.val(embed).n, ec = cx.tape.val(embed).c, et = cx.tape.val(embed).t;
    if (fc != cfg_.in_channels)
      throw ContractError("generator: feature channels " + std::to_string(fc) + " != " +
                          std::to_string(cfg_.in_channels));
    if (ft < 1) throw ContractError("generator: need at least one input frame");
    if (en != fn || ec != cfg_.cond_dim || et != 1)
      throw ContractError("generator: embedding must be [N, cond_dim, 1]");
    const T slope = static_cast<T>(cfg_.slope);
    int h = pre_.apply(cx, feats);
    for (auto& stage : stages_) {
      h = cx.tape.leaky_relu(h, slope);
      h = stage.up.apply(cx, h);
      for (auto& blk : stage.blocks) {
        int gamma = cx.tape.affine_const(blk.gamma.apply(cx, embed), T(1), T(1));
        int beta = blk.beta.apply(cx, embed);
        int t = cx.tape.leaky_relu(cx.tape.film(h, gamma, beta), slope);
        t = blk.c1.apply(cx, t);
        t = cx.tape.leaky_relu(t, slope);
        t = blk.c2.apply(cx, t);
        h = cx.tape.add(h, t);
      }
    }
    h = cx.tape.leaky_relu(h, slope);
    return cx.tape.tanh_(out_.apply(cx, h));
  }

  /// Inference: features [1, in_channels, frames] -> 24 kHz waveform of
  /// exactly frames * 960 samples.
  Waveform generate(const Tensor<float>& feats, const SpeakerEmbedding& e) {
    if (static_cast<int>(e.e.size()) != cfg_.cond_dim)
      throw ContractError("generator: embedding dimension " + std::to_string(e.e.size()) +
                          " != " + std::to_string(cfg_.cond_dim));
    Tensor<float> emb(1, cfg_.cond_dim, 1);
    std::copy(e.e.begin(), e.e.end(), emb.v.begin());
    Tape<float> tape;
    Ctx<float> cx(tape, /*train_mode=*/false);
    int y = apply(cx, tape.input(feats, false), tape.input(std::move(emb), false));
    Waveform out;
    out.sample_rate = 24000;
    out.samples.assign(tape.val(y).v.begin(), tape.val(y).v.end());
    return out;
  }

  void collect(std::vector<Param*>* ps) {
    pre_.collect(ps);
    for (auto& stage : stages_) {
      stage.up.collect(ps);
      for (auto& blk : stage.blocks) {
        blk.gamma.collect(ps);
        blk.beta.collect(ps);
        blk.c1.collect(ps);
        blk.c2.collect(ps);
      }
    }
    out_.collect(ps);
  }

 private:
  struct ResBlock {
    Linear gamma, beta;
    Conv1d c1, c2;
  };
  struct Stage {
    ConvTranspose1d up;
    std::vector<ResBlock> blocks;
  };
  GeneratorConfig cfg_;
  Conv1d pre_;
  std::vector<Stage> stages_;
  Conv1d out_;
};

}  // namespace vcpipe
