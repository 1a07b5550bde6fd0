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

#include "vcpipe/discriminator.hpp"
#include "vcpipe/f0_encoder.hpp"
#include "vcpipe/generator.hpp"
#include "vcpipe/speaker.hpp"

namespace vcpipe {

/// Shapes of every learned module plus the two mel front-ends (reconstruction
/// target and speaker summary). The content encoder contributes only its
/// output width here — it is frozen by construction and owns no parameters.
struct ModelConfig {
  int content_dim = 256;
  F0EncoderConfig f0;
  SpeakerEmbedderConfig spk;
  GeneratorConfig gen;
  DiscConfig disc;
  // Reconstruction-loss spectrogram. A freshly initialised generator emits
  // near-silence; the power floor sits low enough that its log-mel still
  // carries gradient (1e-10 in power ~ the usual 1e-5 magnitude clamp).
  MelConfig rec_mel = [] { MelConfig m; m.log_floor = 1e-10; return m; }();
  MelConfig spk_mel;  // speaker-summary spectrogram

  void validate() const {
    gen.validate();
    disc.validate();
    rec_mel.validate();
    spk_mel.validate();
    if (content_dim < 1) throw ConfigError("model: content_dim must be positive");
    if (gen.in_channels != content_dim + f0.out_channels)
      throw ConfigError("model: generator input width " + std::to_string(gen.in_channels) +
                        " != content " + std::to_string(content_dim) + " + pitch " +
                        std::to_string(f0.out_channels));
    if (gen.cond_dim != spk.dim)
      throw ConfigError("model: generator conditioning width != speaker embedding size");
    if (spk_mel.n_mels != spk.n_mels)
      throw ConfigError("model: speaker summary bands != embedder input width");
    if (rec_mel.sample_rate != 24000 || spk_mel.sample_rate != 24000)
      throw ConfigError("model: mel front-ends must run at 24 kHz");
  }
};

/// All trainable modules of the conversion pipeline under one roof.
struct VcModel {
  ModelConfig cfg;
  F0Encoder f0_enc;
  SpeakerEmbedder spk;
  Generator gen;
  DiscEnsemble disc;

  VcModel(const ModelConfig& config, uint64_t seed) : cfg(config) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    f0_enc = F0Encoder(cfg.f0, rng);
    spk = SpeakerEmbedder(cfg.spk, rng);
    gen = Generator(cfg.gen, rng);
    disc = DiscEnsemble(cfg.disc, rng);
  }

  /// Everything the predictor-side optimizer updates.
  std::vector<Param*> predictor_params() {
    std::vector<Param*> ps;
    f0_enc.collect(&ps);
    spk.collect(&ps);
    gen.collect(&ps);
    return ps;
  }

  std::vector<Param*> disc_params() {
    std::vector<Param*> ps;
    disc.collect(&ps);
    return ps;
  }

  /// Checkpoint contents: both sides, names unique, content encoder absent.
  std::vector<Param*> all_params() {
    std::vector<Param*> ps = predictor_params();
    std::vector<Param*> ds = disc_params();
    ps.insert(ps.end(), ds.begin(), ds.end());
    check_unique_names(ps);
    return ps;
  }
};

}  // namespace vcpipe
