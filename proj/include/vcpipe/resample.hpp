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
#include <cstdint>
#include <numeric>
#include <vector>

#include "vcpipe/errors.hpp"

namespace vcpipe {

/// Output length contract of the resampler: round(n * target / source).
inline size_t resampled_length(size_t n, int src_rate, int target_rate) {
  // round-half-up in exact integer arithmetic
  uint64_t g = std::gcd<uint64_t>(src_rate, target_rate);
  uint64_t up = target_rate / g, down = src_rate / g;
  return static_cast<size_t>((2 * static_cast<uint64_t>(n) * up + down) / (2 * down));
}

/// Windowed-sinc resampler (Blackman window, 16 zero crossings).
/// Deterministic; output length follows resampled_length().
inline std::vector<float> resample(const std::vector<float>& x, int src_rate, int target_rate) {
  if (src_rate <= 0 || target_rate <= 0) throw ContractError("resample: rates must be positive");
  if (src_rate == target_rate) return x;
  if (x.empty()) return {};

  uint64_t g = std::gcd<uint64_t>(src_rate, target_rate);
  const int64_t up = static_cast<int64_t>(target_rate / g);
  const int64_t down = static_cast<int64_t>(src_rate / g);
  const size_t out_len = resampled_length(x.size(), src_rate, target_rate);

  // Cutoff relative to the input Nyquist; widen the kernel when downsampling.
  const double fc = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const int zero_crossings = 16;
  const int half = static_cast<int>(std::ceil(zero_crossings / fc));

  auto kernel = [&](double t) -> double {
    double w = t / half;  // Blackman window support is |w| <= 1
    if (w <= -1.0 || w >= 1.0) return 0.0;
    double win = 0.42 + 0.5 * std::cos(M_PI * w) + 0.08 * std::cos(2.0 * M_PI * w);
    double a = M_PI * fc * t;
    double sinc = (std::fabs(a) < 1e-12) ? 1.0 : std::sin(a) / a;
    return fc * sinc * win;
  };

  std::vector<float> y(out_len, 0.0f);
  const int64_t n = static_cast<int64_t>(x.size());
  for (size_t j = 0; j < out_len; ++j) {
    int64_t num = static_cast<int64_t>(j) * down;
    int64_t q = num / up;
    double frac = static_cast<double>(num % up) / static_cast<double>(up);
    double acc = 0.0;
    for (int64_t m = q - half; m <= q + half + 1; ++m) {
      if (m < 0 || m >= n) continue;
      acc += static_cast<double>(x[static_cast<size_t>(m)]) * kernel(static_cast<double>(m - q) - frac);
    }
    y[j] = static_cast<float>(acc);
  }
  return y;
}

}  // namespace vcpipe
