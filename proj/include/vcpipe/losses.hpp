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
#include <string>
#include <vector>

#include "vcpipe/discriminator.hpp"
#include "vcpipe/mel.hpp"

namespace vcpipe {

/// Weights of the predictor-side objective: spectral reconstruction,
/// adversarial term, feature matching, and the embedding prior penalty.
struct LossWeights {
  double lambda_rec = 45.0;
  double lambda_advp = 1.0;
  double lambda_fm = 1.0;
  double lambda_spk = 0.01;

  void validate() const {
    if (lambda_rec < 0 || lambda_advp < 0 || lambda_fm < 0 || lambda_spk < 0)
      throw ConfigError("loss weights must be non-negative");
  }
};

/// Mean absolute difference between two equally shaped log-mel spectrograms.
/// Mean (not sum) keeps the weight scale independent of segment length.
inline double rec_loss(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames != b.frames || a.n_mels != b.n_mels)
    throw ContractError("rec loss: mel shapes differ (" + std::to_string(a.frames) + "x" +
                        std::to_string(a.n_mels) + " vs " + std::to_string(b.frames) + "x" +
                        std::to_string(b.n_mels) + ")");
  if (a.values.empty()) throw ContractError("rec loss: empty spectrograms");
  double acc = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i)
    acc += std::fabs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]));
  return acc / static_cast<double>(a.values.size());
}

/// Least-squares generator objective: sum over sub-discriminators of
/// (score - 1)^2, pushing generated audio toward the real label.
inline double adv_gen_loss(const std::vector<DiscriminatorOutput>& fake) {
  if (fake.empty()) throw ContractError("adv gen loss: empty discriminator list");
  double acc = 0.0;
  for (const auto& o : fake) acc += (o.score - 1.0) * (o.score - 1.0);
  return acc;
}

/// Least-squares discriminator objective: real toward 1, generated toward 0,
/// summed over sub-discriminators.
inline double adv_disc_loss(const std::vector<DiscriminatorOutput>& real,
                            const std::vector<DiscriminatorOutput>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw ContractError("adv disc loss: output lists must be nonempty and equal length");
  double acc = 0.0;
  for (size_t k = 0; k < real.size(); ++k) {
    acc += (real[k].score - 1.0) * (real[k].score - 1.0);
    acc += fake[k].score * fake[k].score;
  }
  return acc;
}

/// Feature matching: per layer, the L1 distance between real and generated
/// feature maps divided by the layer size; summed over layers and
/// sub-discriminators.
inline double fm_loss(const std::vector<DiscriminatorOutput>& real,
                      const std::vector<DiscriminatorOutput>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw ContractError("fm loss: output lists must be nonempty and equal length");
  double acc = 0.0;
  for (size_t k = 0; k < real.size(); ++k) {
    if (real[k].feature_maps.size() != fake[k].feature_maps.size())
      throw ContractError("fm loss: layer counts differ in sub-discriminator " +
                          std::to_string(k));
    for (size_t i = 0; i < real[k].feature_maps.size(); ++i) {
      const auto& r = real[k].feature_maps[i];
      const auto& f = fake[k].feature_maps[i];
      if (r.size() != f.size() || r.empty())
        throw ContractError("fm loss: layer " + std::to_string(i) +
                            " shapes differ in sub-discriminator " + std::to_string(k));
      double layer = 0.0;
      for (size_t j = 0; j < r.size(); ++j)
        layer += std::fabs(static_cast<double>(r[j]) - static_cast<double>(f[j]));
      acc += layer / static_cast<double>(r.size());
    }
  }
  return acc;
}

/// Predictor-side total: weighted sum of the four components.
inline double total_predictor_loss(double rec, double advp, double fm, double spk,
                                   const LossWeights& w) {
  w.validate();
  return w.lambda_rec * rec + w.lambda_advp * advp + w.lambda_fm * fm + w.lambda_spk * spk;
}

// ---- tape builders -------------------------------------------------------
// A sub-discriminator's per-item score is the mean of its final map; the
// adversarial terms square the per-item score gap and average over the
// batch, matching the scalar ops above.

template <typename T>
int adv_gen_loss_node(Tape<T>& tape, const std::vector<TapeDiscOut>& fake) {
  if (fake.empty()) throw ContractError("adv gen loss: empty discriminator list");
  int total = -1;
  for (const auto& o : fake) {
    int s = tape.mean_over_ct(o.final_map);
    int d = tape.affine_const(s, T(1), T(-1));
    int term = tape.mean_all(tape.mul(d, d));
    total = total < 0 ? term : tape.add(total, term);
  }
  return total;
}

template <typename T>
int adv_disc_loss_node(Tape<T>& tape, const std::vector<TapeDiscOut>& real,
                       const std::vector<TapeDiscOut>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw ContractError("adv disc loss: output lists must be nonempty and equal length");
  int total = -1;
  for (size_t k = 0; k < real.size(); ++k) {
    int sr = tape.mean_over_ct(real[k].final_map);
    int dr = tape.affine_const(sr, T(1), T(-1));
    int sf = tape.mean_over_ct(fake[k].final_map);
    int term = tape.add(tape.mean_all(tape.mul(dr, dr)), tape.mean_all(tape.mul(sf, sf)));
    total = total < 0 ? term : tape.add(total, term);
  }
  return total;
}

template <typename T>
int fm_loss_node(Tape<T>& tape, const std::vector<TapeDiscOut>& real,
                 const std::vector<TapeDiscOut>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw ContractError("fm loss: output lists must be nonempty and equal length");
  int total = -1;
  for (size_t k = 0; k < real.size(); ++k) {
    if (real[k].fmaps.size() != fake[k].fmaps.size())
      throw ContractError("fm loss: layer counts differ in sub-discriminator " +
                          std::to_string(k));
    for (size_t i = 0; i < real[k].fmaps.size(); ++i) {
      int term = tape.mean_abs_diff(real[k].fmaps[i], fake[k].fmaps[i]);
      total = total < 0 ? term : tape.add(total, term);
    }
  }
  return total;
}

template <typename T>
int total_predictor_loss_node(Tape<T>& tape, int rec, int advp, int fm, int spk,
                              const LossWeights& w) {
  w.validate();
  int total = tape.affine_const(rec, static_cast<T>(w.lambda_rec), T(0));
  total = tape.add(total, tape.affine_const(advp, static_cast<T>(w.lambda_advp), T(0)));
  total = tape.add(total, tape.affine_const(fm, static_cast<T>(w.lambda_fm), T(0)));
  total = tape.add(total, tape.affine_const(spk, static_cast<T>(w.lambda_spk), T(0)));
  return total;
}

}  // namespace vcpipe
