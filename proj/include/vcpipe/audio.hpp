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
#include <string>
#include <vector>

#include "vcpipe/errors.hpp"
#include "vcpipe/resample.hpp"
#include "vcpipe/wav.hpp"

namespace vcpipe {

/// Mono audio in [-1, 1] at a known sample rate. Immutable by convention
/// once produced; every pipeline stage consumes and returns values.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Loads a WAV file: channel-averaged to mono, resampled to target_rate,
/// peak-normalized into [-1, 1] (only rescales when the peak exceeds 1).
inline Waveform load_audio(const std::string& path, int target_rate) {
  if (target_rate <= 0) throw ContractError("load_audio: target_rate must be positive");
  WavData w = read_wav(path);
  if (w.samples.empty()) throw EmptyInputError("zero-length audio: " + path);

  std::vector<float> mono(w.frames());
  if (w.channels == 1) {
    mono = std::move(w.samples);
  } else {
    for (size_t f = 0; f < mono.size(); ++f) {
      double acc = 0.0;
      for (int ch = 0; ch < w.channels; ++ch) acc += w.samples[f * w.channels + ch];
      mono[f] = static_cast<float>(acc / w.channels);
    }
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples = resample(mono, w.sample_rate, target_rate);
  if (out.samples.empty()) throw EmptyInputError("audio empty after resampling: " + path);

  float peak = 0.0f;
  for (float s : out.samples) {
    if (!std::isfinite(s)) throw IoError("non-finite sample in audio: " + path);
    peak = std::max(peak, std::fabs(s));
  }
  if (peak > 1.0f) {
    float inv = 1.0f / peak;
    for (float& s : out.samples) s *= inv;
  }
  return out;
}

/// Writes mono 16-bit PCM. load_audio(save_audio(w)) matches w within one
/// quantization step per sample.
inline void save_audio(const Waveform& w, const std::string& path) {
  if (w.samples.empty()) throw EmptyInputError("save_audio: empty waveform");
  if (w.sample_rate <= 0) throw ContractError("save_audio: bad sample rate");
  write_wav_pcm16(path, w.samples.data(), w.samples.size(), w.sample_rate);
}

}  // namespace vcpipe
