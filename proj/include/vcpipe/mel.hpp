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
#include <cstddef>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/fft.hpp"

namespace vcpipe {

/// Spectrogram front-end parameters. Defaults are the 24 kHz configuration
/// used across the pipeline: 10 ms hop, 80 mel bands up to 12 kHz.
struct MelConfig {
  int sample_rate = 24000;
  int n_fft = 1024;
  int hop = 240;
  int win = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 12000.0;
  double log_floor = 1e-5;  // linear floor; entries are log(max(power, log_floor))

  void validate() const {
    if (sample_rate <= 0) throw ContractError("mel: sample_rate must be positive");
    if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw ContractError("mel: n_fft must be a power of two");
    if (!(hop > 0 && hop <= win && win <= n_fft)) throw ContractError("mel: need 0 < hop <= win <= n_fft");
    if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0))
      throw ContractError("mel: need 0 <= fmin < fmax <= sample_rate/2");
    if (n_mels < 1) throw ContractError("mel: n_mels must be >= 1");
    if (log_floor <= 0.0) throw ContractError("mel: log_floor must be positive");
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank, n_mels x (n_fft/2 + 1), peak weight 1.
inline std::vector<double> mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const int bins = cfg.n_fft / 2 + 1;
  std::vector<double> fb(static_cast<size_t>(cfg.n_mels) * bins, 0.0);
  const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
  std::vector<double> centers(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers[i] = mel_to_hz(mlo + (mhi - mlo) * i / (cfg.n_mels + 1));
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = centers[m], mid = centers[m + 1], right = centers[m + 2];
    for (int b = 0; b < bins; ++b) {
      double f = static_cast<double>(b) * cfg.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > left && f < right)
        w = (f <= mid) ? (f - left) / (mid - left) : (right - f) / (right - mid);
      fb[static_cast<size_t>(m) * bins + b] = w;
    }
  }
  return fb;
}

/// Center frequency (Hz) of mel band m, for filterbank sanity oracles.
inline double mel_band_center_hz(const MelConfig& cfg, int m) {
  const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
  return mel_to_hz(mlo + (mhi - mlo) * (m + 1) / (cfg.n_mels + 1));
}

namespace detail {

inline size_t reflect_index(long long i, long long len) {
  if (len == 1) return 0;
  while (i < 0 || i >= len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * len - 2 - i;
  }
  return static_cast<size_t>(i);
}

}  // namespace detail

/// Log-mel computation shared by the plain front end and the differentiable
/// spectrogram op. Center padding (reflect), Hann window, power spectrum,
/// triangular mel weights, log with linear floor. frames = len/hop + 1.
template <typename T>
class MelComputer {
 public:
  explicit MelComputer(const MelConfig& cfg) : cfg_(cfg), fft_(cfg.n_fft) {
    cfg.validate();
    bins_ = cfg.n_fft / 2 + 1;
    window_.resize(cfg.win);
    for (int i = 0; i < cfg.win; ++i)
      window_[i] = static_cast<T>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.win));
    auto fb = mel_filterbank(cfg);
    fb_.resize(fb.size());
    for (size_t i = 0; i < fb.size(); ++i) fb_[i] = static_cast<T>(fb[i]);
  }

  const MelConfig& config() const { return cfg_; }
  int frames_for(size_t len) const { return static_cast<int>(len / cfg_.hop) + 1; }
  int bins() const { return bins_; }

  /// Per-utterance spectra kept for the backward pass.
  struct Cache {
    int frames = 0;
    size_t len = 0;
    std::vector<T> re, im;      // frames x bins
    std::vector<T> mel_power;   // frames x n_mels, pre-floor
  };

  /// out: frames x n_mels, row-major. cache may be null.
  void compute(const T* x, size_t len, std::vector<T>* out, Cache* cache) const {
    if (len == 0) throw ContractError("mel: empty waveform");
    const int frames = frames_for(len);
    const int pad = cfg_.n_fft / 2;
    const int off = (cfg_.n_fft - cfg_.win) / 2;
    out->assign(static_cast<size_t>(frames) * cfg_.n_mels, T(0));
    if (cache) {
      cache->frames = frames;
      cache->len = len;
      cache->re.assign(static_cast<size_t>(frames) * bins_, T(0));
      cache->im.assign(static_cast<size_t>(frames) * bins_, T(0));
      cache->mel_power.assign(static_cast<size_t>(frames) * cfg_.n_mels, T(0));
    }
    std::vector<std::complex<T>> buf(cfg_.n_fft);
    std::vector<T> power(bins_);
    const T floor = static_cast<T>(cfg_.log_floor);
    for (int f = 0; f < frames; ++f) {
      std::fill(buf.begin(), buf.end(), std::complex<T>(0, 0));
      const long long base = static_cast<long long>(f) * cfg_.hop - pad + off;
      for (int i = 0; i < cfg_.win; ++i) {
        long long src = base + i;
        T s = x[detail::reflect_index(src, static_cast<long long>(len))];
        buf[off + i] = std::complex<T>(s * window_[i], T(0));
      }
      fft_.forward(buf.data());
      for (int b = 0; b < bins_; ++b) {
        T re = buf[b].real(), im = buf[b].imag();
        power[b] = re * re + im * im;
        if (cache) {
          cache->re[static_cast<size_t>(f) * bins_ + b] = re;
          cache->im[static_cast<size_t>(f) * bins_ + b] = im;
        }
      }
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const T* w = fb_.data() + static_cast<size_t>(m) * bins_;
        T acc = 0;
        for (int b = 0; b < bins_; ++b) acc += w[b] * power[b];
        if (cache) cache->mel_power[static_cast<size_t>(f) * cfg_.n_mels + m] = acc;
        (*out)[static_cast<size_t>(f) * cfg_.n_mels + m] = std::log(std::max(acc, floor));
      }
    }
  }

  /// Accumulates d(loss)/d(x) given d(loss)/d(logmel), using the cached
  /// spectra. grad_out: frames x n_mels. grad_x must hold cache.len entries.
  void backward(const Cache& cache, const std::vector<T>& grad_out, T* grad_x) const {
    const int frames = cache.frames;
    const int pad = cfg_.n_fft / 2;
    const int off = (cfg_.n_fft - cfg_.win) / 2;
    const T floor = static_cast<T>(cfg_.log_floor);
    std::vector<T> dpower(bins_);
    std::vector<std::complex<T>> buf(cfg_.n_fft);
    for (int f = 0; f < frames; ++f) {
      // through the log and the mel weights
      std::fill(dpower.begin(), dpower.end(), T(0));
      for (int m = 0; m < cfg_.n_mels; ++m) {
        T mp = cache.mel_power[static_cast<size_t>(f) * cfg_.n_mels + m];
        if (mp <= floor) continue;  // clamped entries pass no gradient
        T g = grad_out[static_cast<size_t>(f) * cfg_.n_mels + m] / mp;
        const T* w = fb_.data() + static_cast<size_t>(m) * bins_;
        for (int b = 0; b < bins_; ++b) dpower[b] += g * w[b];
      }
      // through the power spectrum: adjoint of the half-spectrum DFT is a
      // forward FFT of (g_re - i*g_im), real part taken
      for (int b = 0; b < cfg_.n_fft; ++b) buf[b] = std::complex<T>(0, 0);
      for (int b = 0; b < bins_; ++b) {
        T re = cache.re[static_cast<size_t>(f) * bins_ + b];
        T im = cache.im[static_cast<size_t>(f) * bins_ + b];
        buf[b] = std::complex<T>(2 * re * dpower[b], -2 * im * dpower[b]);
      }
      fft_.forward(buf.data());
      const long long base = static_cast<long long>(f) * cfg_.hop - pad + off;
      for (int i = 0; i < cfg_.win; ++i) {
        long long src = base + i;
        size_t idx = detail::reflect_index(src, static_cast<long long>(cache.len));
        grad_x[idx] += buf[off + i].real() * window_[i];
      }
    }
  }

 private:
  MelConfig cfg_;
  Fft<T> fft_;
  int bins_;
  std::vector<T> window_;
  std::vector<T> fb_;
};

/// Log-amplitude mel spectrogram, frames x n_mels.
struct MelSpectrogram {
  int frames = 0;
  int n_mels = 0;
  int hop = 0;
  std::vector<float> values;  // row-major frames x n_mels
  MelConfig params;

  float at(int frame, int mel) const {
    return values[static_cast<size_t>(frame) * n_mels + mel];
  }
};

inline MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate)
    throw ContractError("mel_spectrogram: waveform sample rate does not match config");
  if (w.samples.empty()) throw EmptyInputError("mel_spectrogram: empty waveform");
  MelComputer<float> mc(cfg);
  MelSpectrogram out;
  out.frames = mc.frames_for(w.samples.size());
  out.n_mels = cfg.n_mels;
  out.hop = cfg.hop;
  out.params = cfg;
  mc.compute(w.samples.data(), w.samples.size(), &out.values, nullptr);
  return out;
}

}  // namespace vcpipe
