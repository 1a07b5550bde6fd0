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

#include <memory>
#include <string>
#include <utility>

#include "vcpipe/content.hpp"
#include "vcpipe/f0_encoder.hpp"
#include "vcpipe/model.hpp"
#include "vcpipe/runconfig.hpp"

namespace vcpipe {

/// Any-to-any conversion: the source supplies content and prosody, the
/// reference supplies the voice. Deterministic — the embedding is the
/// posterior mean, no sampling. Output length is aligned-frames x 960
/// samples at 24 kHz, within one 40 ms frame of the source duration.
inline Waveform convert(const Waveform& source, const Waveform& reference, VcModel& model,
                        const LinguisticEncoder& enc, const F0Config& fcfg = {}) {
  if (enc.dim() != model.cfg.content_dim)
    throw ConfigError("convert: encoder width " + std::to_string(enc.dim()) +
                      " != model content_dim " + std::to_string(model.cfg.content_dim));
  ContentFeatures content = extract_content(source, enc);
  F0Features pitch = encode_f0(normalize_f0(extract_f0(source, fcfg)), model.f0_enc);
  auto [c, p] = align_features(std::move(content), std::move(pitch));

  Tensor<float> feats(1, c.dim + p.channels, c.frames);
  for (int f = 0; f < c.frames; ++f) {
    for (int d = 0; d < c.dim; ++d) feats.at(0, d, f) = c.at(f, d);
    for (int d = 0; d < p.channels; ++d) feats.at(0, c.dim + d, f) = p.at(f, d);
  }

  SpeakerPosterior post = embed_speaker(reference, model.spk, model.cfg.spk_mel);
  SpeakerEmbedding e = sample_embedding(post, SampleMode::kTest);
  return model.gen.generate(feats, e);
}

/// A checkpoint rehydrated into a runnable pipeline: the run configuration
/// stored in the file, the model loaded from it, and the content adapter the
/// configuration names.
struct LoadedPipeline {
  RunConfig rc;
  VcModel model;
  std::unique_ptr<LinguisticEncoder> enc;
  CheckpointMeta meta;
};

inline LoadedPipeline load_pipeline(const std::string& ckpt_path, bool force = false) {
  CheckpointMeta peek = peek_checkpoint(ckpt_path);
  RunConfig rc = parse_run_config(peek.config_text);
  LoadedPipeline lp{rc, VcModel(rc.model, rc.train.seed), make_content_encoder(rc.content_encoder),
                    CheckpointMeta{}};
  lp.meta = load_checkpoint(ckpt_path, lp.model.all_params(), config_hash(rc), force);
  return lp;
}

}  // namespace vcpipe
