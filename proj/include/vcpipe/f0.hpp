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

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/wav.hpp"

namespace vcpipe {

/// Pitch track at 10 ms. Unvoiced frames carry f0 = 0; voiced values sit in
/// [50, 1100] Hz.
struct F0Track {
  std::vector<float> f0_hz;
  std::vector<uint8_t> voiced;

  size_t frames() const { return f0_hz.size(); }

  void validate() const {
    if (f0_hz.size() != voiced.size()) throw ContractError("f0 track: channel length mismatch");
    for (size_t i = 0; i < f0_hz.size(); ++i) {
      if ((f0_hz[i] > 0) != (voiced[i] != 0))
        throw ContractError("f0 track: voiced flag disagrees with f0");
      if (voiced[i] && (f0_hz[i] < 50.0f || f0_hz[i] > 1100.0f))
        throw ContractError("f0 track: voiced value outside [50, 1100] Hz");
    }
  }
};

enum class F0Method { kBuiltin, kExternal };

struct F0Config {
  F0Method method = F0Method::kBuiltin;
  std::string external_cmd;  // invoked as "<cmd> <wav-path>", TSV "f0\tvoiced" per line
  double fmin = 50.0;
  double fmax = 1100.0;
  double voicing_threshold = 0.45;  // cumulative-mean difference threshold
  int hop = 240;                    // 10 ms at 24 kHz
  int win = 600;                    // 25 ms analysis window
};

namespace detail {

/// Autocorrelation-difference pitch per frame: difference function over the
/// lag band, cumulative-mean normalization, first dip under the threshold
/// walked to its local minimum, parabolic refinement.
inline void yin_frame(const float* x, int n_avail, const F0Config& cfg, int sample_rate,
                      float* f0_out, uint8_t* voiced_out) {
  const int w = cfg.win;
  const int tau_min = std::max(2, static_cast<int>(sample_rate / cfg.fmax));
  const int tau_max = static_cast<int>(sample_rate / cfg.fmin);
  const int need = w + tau_max;

  // Zero-padded frame buffer; tail frames read past the signal.
  std::vector<double> buf(need, 0.0);
  for (int i = 0; i < need && i < n_avail; ++i) buf[i] = x[i];

  std::vector<double> d(tau_max + 1, 0.0);
  for (int tau = 1; tau <= tau_max; ++tau) {
    double acc = 0.0;
    for (int j = 0; j < w; ++j) {
      double diff = buf[j] - buf[j + tau];
      acc += diff * diff;
    }
    d[tau] = acc;
  }
  // cumulative-mean normalized difference; flat silence stays at 1
  std::vector<double> dn(tau_max + 1, 1.0);
  double running = 0.0;
  for (int tau = 1; tau <= tau_max; ++tau) {
    running += d[tau];
    dn[tau] = running > 0.0 ? d[tau] * tau / running : 1.0;
  }

  int best = -1;
  for (int tau = tau_min; tau <= tau_max; ++tau) {
    if (dn[tau] < cfg.voicing_threshold) {
      while (tau + 1 <= tau_max && dn[tau + 1] < dn[tau]) ++tau;
      best = tau;
      break;
    }
  }
  if (best < 0) {
    *f0_out = 0.0f;
    *voiced_out = 0;
    return;
  }
  double tau_ref = best;
  if (best > tau_min && best < tau_max) {
    double a = dn[best - 1], b = dn[best], c = dn[best + 1];
    double denom = a - 2.0 * b + c;
    if (std::fabs(denom) > 1e-12) {
      double shift = 0.5 * (a - c) / denom;
      if (shift > -1.0 && shift < 1.0) tau_ref = best + shift;
    }
  }
  double f0 = sample_rate / tau_ref;
  f0 = std::clamp(f0, cfg.fmin, cfg.fmax);
  *f0_out = static_cast<float>(f0);
  *voiced_out = 1;
}

inline F0Track extract_f0_builtin(const Waveform& w, const F0Config& cfg) {
  const int frames = static_cast<int>(w.samples.size()) / cfg.hop;
  F0Track track;
  track.f0_hz.resize(std::max(frames, 0), 0.0f);
  track.voiced.resize(std::max(frames, 0), 0);
  for (int f = 0; f < frames; ++f) {
    const size_t start = static_cast<size_t>(f) * cfg.hop;
    yin_frame(w.samples.data() + start, static_cast<int>(w.samples.size() - start), cfg,
              w.sample_rate, &track.f0_hz[f], &track.voiced[f]);
  }
  return track;
}

inline F0Track extract_f0_external(const Waveform& w, const F0Config& cfg) {
  if (cfg.external_cmd.empty())
    throw ConfigError("f0: external extractor selected but no adapter command configured");
  static int counter = 0;
  auto tmp = std::filesystem::temp_directory_path() /
             ("vcpipe_f0_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".wav");
  save_audio(w, tmp.string());
  std::string cmd = cfg.external_cmd + " " + tmp.string();
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(tmp);
    throw ConfigError("f0: failed to launch external adapter: " + cfg.external_cmd);
  }
  std::string output;
  char chunk[4096];
  size_t got;
  while ((got = ::fread(chunk, 1, sizeof(chunk), pipe)) > 0) output.append(chunk, got);
  int status = ::pclose(pipe);
  std::filesystem::remove(tmp);
  if (status != 0)
    throw ConfigError("f0: external adapter exited with status " + std::to_string(status) + ": " +
                      cfg.external_cmd);

  F0Track track;
  std::istringstream lines(output);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double f0 = 0.0;
    int voiced = 0;
    if (!(ls >> f0 >> voiced))
      throw ConfigError("f0: unparseable adapter output line: " + line);
    if (voiced == 0 || f0 <= 0.0) {
      track.f0_hz.push_back(0.0f);
      track.voiced.push_back(0);
    } else {
      track.f0_hz.push_back(static_cast<float>(std::clamp(f0, cfg.fmin, cfg.fmax)));
      track.voiced.push_back(1);
    }
  }
  const long long expect = static_cast<long long>(w.samples.size()) / cfg.hop;
  const long long gotf = static_cast<long long>(track.frames());
  if (std::llabs(gotf - expect) > 1)
    throw ContractError("f0: adapter returned " + std::to_string(gotf) + " frames, expected " +
                        std::to_string(expect) + " +/- 1");
  return track;
}

}  // namespace detail

/// One (f0, voiced) pair per 10 ms frame; frames = floor(samples / hop) for
/// the builtin tracker, the adapter's own count (within +/- 1) otherwise.
inline F0Track extract_f0(const Waveform& w, const F0Config& cfg = {}) {
  if (static_cast<int>(w.samples.size()) < cfg.hop)
    throw EmptyInputError("f0: waveform shorter than one frame");
  F0Track track = cfg.method == F0Method::kBuiltin ? detail::extract_f0_builtin(w, cfg)
                                                   : detail::extract_f0_external(w, cfg);
  track.validate();
  return track;
}

/// Two-channel pitch features: standardized log-f0 (statistics over voiced
/// frames only, zero elsewhere) and the voiced flag. Standardizing per
/// utterance removes the speaker's register and range from the track.
struct NormalizedF0 {
  std::vector<float> logf0;   // channel 0
  std::vector<float> voiced;  // channel 1, 0/1
  size_t frames() const { return logf0.size(); }
};

inline NormalizedF0 normalize_f0(const F0Track& track) {
  track.validate();
  NormalizedF0 out;
  out.logf0.assign(track.frames(), 0.0f);
  out.voiced.assign(track.frames(), 0.0f);
  // Shifted two-pass statistics: residuals against the first voiced value,
  // so a constant track standardizes to exact zeros.
  double offset = 0.0, mean = 0.0;
  size_t nv = 0;
  for (size_t i = 0; i < track.frames(); ++i)
    if (track.voiced[i]) {
      double lf = std::log(static_cast<double>(track.f0_hz[i]));
      if (nv == 0) offset = lf;
      mean += lf - offset;
      ++nv;
    }
  if (nv == 0) return out;  // silent track: both channels stay zero
  mean /= nv;
  double var = 0.0;
  for (size_t i = 0; i < track.frames(); ++i)
    if (track.voiced[i]) {
      double d = std::log(static_cast<double>(track.f0_hz[i])) - offset - mean;
      var += d * d;
    }
  var /= nv;
  const double inv_std = 1.0 / std::sqrt(var + 1e-5);
  for (size_t i = 0; i < track.frames(); ++i) {
    if (!track.voiced[i]) continue;
    out.logf0[i] = static_cast<float>(
        (std::log(static_cast<double>(track.f0_hz[i])) - offset - mean) * inv_std);
    out.voiced[i] = 1.0f;
  }
  return out;
}

}  // namespace vcpipe
