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
#include <vector>

#include "vcpipe/f0.hpp"
#include "vcpipe/nn.hpp"

namespace vcpipe {

/// Pitch features on the 40 ms content grid: frames = floor(input / 4).
struct F0Features {
  int frames = 0;
  int channels = 0;
  std::vector<float> values;  // row-major frames x channels

  float at(int frame, int ch) const { return values[static_cast<size_t>(frame) * channels + ch]; }
};

struct F0EncoderConfig {
  int hidden1 = 64;
  int hidden2 = 128;
  int out_channels = 64;
  float eps = 1e-5f;    // variance guard in every instance norm
  float slope = 0.1f;   // leaky ReLU
};

/// Trainable pitch encoder: input-side instance norm (per-channel affine maps
/// of the input cancel here), then three convolutions with kernel 5 and
/// strides (2, 2, 1), each followed by instance norm and a leaky ReLU.
/// Stride-2 layers use pads (2, 1) so every length halves as floor(n/2),
/// making the total downsampling exactly floor(n/4): 10 ms in, 40 ms out.
class F0Encoder {
 public:
  F0Encoder() = default;

  F0Encoder(const F0EncoderConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
    conv1_.init("f0enc.conv1", 2, cfg.hidden1, 5, 2, 1, 2, 1, PadMode::kZero, true, rng,
                fan_in_std(2 * 5));
    conv2_.init("f0enc.conv2", cfg.hidden1, cfg.hidden2, 5, 2, 1, 2, 1, PadMode::kZero, true, rng,
                fan_in_std(cfg.hidden1 * 5));
    conv3_.init("f0enc.conv3", cfg.hidden2, cfg.out_channels, 5, 1, 1, 2, 2, PadMode::kZero, true,
                rng, fan_in_std(cfg.hidden2 * 5));
  }

  const F0EncoderConfig& config() const { return cfg_; }

  static int out_frames(int in_frames) { return in_frames / 4; }

  /// x: [N, 2, frames], frames >= 4 -> [N, out_channels, floor(frames/4)]
  template <typename T>
  int apply(Ctx<T>& cx, int x) {
    if (cx.tape.val(x).c != 2) throw ContractError("f0 encoder: input must have 2 channels");
    if (cx.tape.val(x).t < 4) throw EmptyInputError("f0 encoder: need at least 4 input frames");
    const T eps = static_cast<T>(cfg_.eps);
    const T slope = static_cast<T>(cfg_.slope);
    int h = cx.tape.instance_norm(x, eps);
    h = conv1_.apply(cx, h);
    h = cx.tape.leaky_relu(cx.tape.instance_norm(h, eps), slope);
    h = conv2_.apply(cx, h);
    h = cx.tape.leaky_relu(cx.tape.instance_norm(h, eps), slope);
    h = conv3_.apply(cx, h);
    h = cx.tape.leaky_relu(cx.tape.instance_norm(h, eps), slope);
    return h;
  }

  void collect(std::vector<Param*>* ps) {
    conv1_.collect(ps);
    conv2_.collect(ps);
    conv3_.collect(ps);
  }

 private:
  F0EncoderConfig cfg_;
  Conv1d conv1_, conv2_, conv3_;
};

/// [1, 2, frames] tensor view of a normalized track.
inline Tensor<float> f0_input_tensor(const NormalizedF0& nf) {
  Tensor<float> x(1, 2, static_cast<int>(nf.frames()));
  std::copy(nf.logf0.begin(), nf.logf0.end(), x.row(0, 0));
  std::copy(nf.voiced.begin(), nf.voiced.end(), x.row(0, 1));
  return x;
}

/// Inference wrapper: runs the encoder on a throwaway tape.
inline F0Features encode_f0(const NormalizedF0& nf, F0Encoder& enc) {
  if (nf.frames() < 4) throw EmptyInputError("encode_f0: need at least 4 input frames");
  Tape<float> tape;
  Ctx<float> cx(tape, /*train_mode=*/false);
  int y = enc.apply(cx, tape.input(f0_input_tensor(nf), false));
  const Tensor<float>& yv = tape.val(y);
  F0Features out;
  out.frames = yv.t;
  out.channels = yv.c;
  out.values.resize(static_cast<size_t>(yv.t) * yv.c);
  for (int f = 0; f < yv.t; ++f)
    for (int ch = 0; ch < yv.c; ++ch) out.values[static_cast<size_t>(f) * yv.c + ch] = yv.at(0, ch, f);
  return out;
}

}  // namespace vcpipe
