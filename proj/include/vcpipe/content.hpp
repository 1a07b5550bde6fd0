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

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/f0_encoder.hpp"
#include "vcpipe/fft.hpp"
#include "vcpipe/mel.hpp"
#include "vcpipe/tensor.hpp"
#include "vcpipe/wav.hpp"

namespace vcpipe {

/// Speaker-agnostic linguistic features on the 40 ms grid.
struct ContentFeatures {
  int frames = 0;
  int dim = 0;
  std::vector<float> values;  // row-major frames x dim

  float at(int frame, int d) const { return values[static_cast<size_t>(frame) * dim + d]; }
};

/// Frozen linguistic feature extractor. Implementations must be deterministic
/// for a fixed input and expose no trainable state.
class LinguisticEncoder {
 public:
  virtual ~LinguisticEncoder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual ContentFeatures encode(const Waveform& w) const = 0;
};

constexpr int kContentRate = 24000;
constexpr int kContentHop = 960;  // 40 ms

/// Runs an encoder and enforces the shared contracts: 24 kHz input, finite
/// output, frame count within one of round(duration / 40 ms).
inline ContentFeatures extract_content(const Waveform& w, const LinguisticEncoder& enc) {
  if (w.sample_rate != kContentRate)
    throw ContractError("content: waveform must be 24 kHz, got " +
                        std::to_string(w.sample_rate));
  if (w.samples.empty()) throw EmptyInputError("content: empty waveform");
  ContentFeatures feats = enc.encode(w);
  if (feats.dim != enc.dim()) throw ContractError("content: adapter dim mismatch");
  const long long want =
      std::llround(static_cast<double>(w.samples.size()) / kContentHop);
  if (std::llabs(static_cast<long long>(feats.frames) - want) > 1)
    throw ContractError("content: adapter returned " + std::to_string(feats.frames) +
                        " frames, expected about " + std::to_string(want));
  for (float v : feats.values)
    if (!std::isfinite(v)) throw ContractError("content: non-finite feature from " + enc.name());
  return feats;
}

/// Desk-scale stand-in for a pretrained recognizer: log-mel over non-centered
/// 40 ms frames, projected through a fixed seeded random linear map. Frame i
/// covers samples [i*960, i*960 + 1024), zero-padded past the end, so
/// frames = floor(len / 960).
class ToyEncoder : public LinguisticEncoder {
 public:
  explicit ToyEncoder(uint64_t seed, int dim = 256)
      : seed_(seed), dim_(dim), fft_(kWin), proj_(dim, kMels) {
    MelConfig cfg;  // 24 kHz defaults: 80 bands to 12 kHz
    auto fb = mel_filterbank(cfg);
    fb_.resize(fb.size());
    for (size_t i = 0; i < fb.size(); ++i) fb_[i] = static_cast<float>(fb[i]);
    window_.resize(kWin);
    for (int i = 0; i < kWin; ++i)
      window_[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / kWin));
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> d(0.0f, 1.0f / std::sqrt(static_cast<float>(kMels)));
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < kMels; ++c) proj_(r, c) = d(rng);
  }

  std::string name() const override { return "toy-mel-proj-" + std::to_string(seed_); }
  int dim() const override { return dim_; }

  static int frames_for(size_t samples) { return static_cast<int>(samples / kContentHop); }

  ContentFeatures encode(const Waveform& w) const override {
    const int frames = frames_for(w.samples.size());
    ContentFeatures out;
    out.frames = frames;
    out.dim = dim_;
    out.values.assign(static_cast<size_t>(frames) * dim_, 0.0f);
    std::vector<std::complex<float>> buf(kWin);
    Eigen::VectorXf mel(kMels);
    const int bins = kWin / 2 + 1;
    const float floor_v = 1e-5f;
    for (int f = 0; f < frames; ++f) {
      const size_t base = static_cast<size_t>(f) * kContentHop;
      for (int i = 0; i < kWin; ++i) {
        const size_t src = base + i;
        const float s = src < w.samples.size() ? w.samples[src] : 0.0f;
        buf[i] = std::complex<float>(s * window_[i], 0.0f);
      }
      fft_.forward(buf.data());
      for (int m = 0; m < kMels; ++m) {
        const float* fb = fb_.data() + static_cast<size_t>(m) * bins;
        float acc = 0.0f;
        for (int b = 0; b < bins; ++b)
          acc += fb[b] * (buf[b].real() * buf[b].real() + buf[b].imag() * buf[b].imag());
        mel(m) = std::log(std::max(acc, floor_v));
      }
      Eigen::Map<Eigen::VectorXf> row(out.values.data() + static_cast<size_t>(f) * dim_, dim_);
      row.noalias() = proj_ * mel;
    }
    return out;
  }

 private:
  static constexpr int kWin = 1024;
  static constexpr int kMels = 80;
  uint64_t seed_;
  int dim_;
  Fft<float> fft_;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> proj_;
  std::vector<float> fb_, window_;
};

/// Adapter for an external recognizer: "<cmd> <wav-path>" must print one
/// line per 40 ms frame with `dim` whitespace-separated floats.
class CommandEncoder : public LinguisticEncoder {
 public:
  CommandEncoder(std::string name, std::string cmd, int dim)
      : name_(std::move(name)), cmd_(std::move(cmd)), dim_(dim) {}

  std::string name() const override { return name_; }
  int dim() const override { return dim_; }

  ContentFeatures encode(const Waveform& w) const override {
    if (cmd_.empty())
      throw ConfigError("content: adapter '" + name_ + "' has no command configured");
    static int counter = 0;
    auto tmp = std::filesystem::temp_directory_path() /
               ("vcpipe_content_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++) + ".wav");
    save_audio(w, tmp.string());
    FILE* pipe = ::popen((cmd_ + " " + tmp.string()).c_str(), "r");
    if (!pipe) {
      std::filesystem::remove(tmp);
      throw ConfigError("content: failed to launch adapter '" + name_ + "': " + cmd_);
    }
    std::string output;
    char chunk[4096];
    size_t got;
    while ((got = ::fread(chunk, 1, sizeof(chunk), pipe)) > 0) output.append(chunk, got);
    int status = ::pclose(pipe);
    std::filesystem::remove(tmp);
    if (status != 0)
      throw ConfigError("content: adapter '" + name_ + "' exited with status " +
                        std::to_string(status));
    ContentFeatures out;
    out.dim = dim_;
    std::istringstream lines(output);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::vector<float> row;
      double v;
      while (ls >> v) row.push_back(static_cast<float>(v));
      if (static_cast<int>(row.size()) != dim_)
        throw ContractError("content: adapter '" + name_ + "' line has " +
                            std::to_string(row.size()) + " values, expected " +
                            std::to_string(dim_));
      out.values.insert(out.values.end(), row.begin(), row.end());
      ++out.frames;
    }
    return out;
  }

 private:
  std::string name_, cmd_;
  int dim_;
};

/// Truncate both streams to the shorter one so channel-wise concatenation on
/// the 40 ms grid is well-defined.
inline std::pair<ContentFeatures, F0Features> align_features(ContentFeatures content,
                                                             F0Features f0feat) {
  if (content.frames == 0) throw EmptyInputError("align: empty content features");
  if (f0feat.frames == 0) throw EmptyInputError("align: empty pitch features");
  const int frames = std::min(content.frames, f0feat.frames);
  content.values.resize(static_cast<size_t>(frames) * content.dim);
  content.frames = frames;
  f0feat.values.resize(static_cast<size_t>(frames) * f0feat.channels);
  f0feat.frames = frames;
  return {std::move(content), std::move(f0feat)};
}

/// [1, dim, frames] tensor view (time innermost) of row-major features.
inline Tensor<float> content_tensor(const ContentFeatures& cf) {
  Tensor<float> x(1, cf.dim, cf.frames);
  for (int f = 0; f < cf.frames; ++f)
    for (int d = 0; d < cf.dim; ++d) x.at(0, d, f) = cf.at(f, d);
  return x;
}

inline Tensor<float> f0_features_tensor(const F0Features& ff) {
  Tensor<float> x(1, ff.channels, ff.frames);
  for (int f = 0; f < ff.frames; ++f)
    for (int d = 0; d < ff.channels; ++d) x.at(0, d, f) = ff.at(f, d);
  return x;
}

/// Builds an encoder from its config string:
///   "toy:<seed>:<dim>"             hermetic mel-projection adapter
///   "command:<name>:<dim>:<cmd>"   external recognizer, <cmd> may hold colons
inline std::unique_ptr<LinguisticEncoder> make_content_encoder(const std::string& spec) {
  const auto fail = [&]() -> std::unique_ptr<LinguisticEncoder> {
    throw ConfigError("content: bad encoder spec '" + spec +
                      "' (want toy:<seed>:<dim> or command:<name>:<dim>:<cmd>)");
  };
  const size_t c1 = spec.find(':');
  if (c1 == std::string::npos) return fail();
  const std::string kind = spec.substr(0, c1);
  try {
    if (kind == "toy") {
      const size_t c2 = spec.find(':', c1 + 1);
      if (c2 == std::string::npos) return fail();
      const uint64_t seed = std::stoull(spec.substr(c1 + 1, c2 - c1 - 1));
      const int dim = std::stoi(spec.substr(c2 + 1));
      return std::make_unique<ToyEncoder>(seed, dim);
    }
    if (kind == "command") {
      const size_t c2 = spec.find(':', c1 + 1);
      if (c2 == std::string::npos) return fail();
      const size_t c3 = spec.find(':', c2 + 1);
      if (c3 == std::string::npos) return fail();
      const std::string name = spec.substr(c1 + 1, c2 - c1 - 1);
      const int dim = std::stoi(spec.substr(c2 + 1, c3 - c2 - 1));
      if (name.empty() || spec.size() <= c3 + 1) return fail();
      return std::make_unique<CommandEncoder>(name, spec.substr(c3 + 1), dim);
    }
  } catch (const std::invalid_argument&) {
    return fail();
  } catch (const std::out_of_range&) {
    return fail();
  }
  return fail();
}

}  // namespace vcpipe
