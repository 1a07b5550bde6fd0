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

#include <complex>
#include <vector>

#include "vcpipe/errors.hpp"

namespace vcpipe {

/// In-place radix-2 DFT, X[k] = sum_n x[n] exp(-2*pi*i*k*n/N).
/// Twiddles are precomputed once; calls are deterministic.
template <typename T>
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    if (n < 2 || (n & (n - 1)) != 0) throw ContractError("fft: size must be a power of two >= 2");
    rev_.resize(n);
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
      rev_[i] = r;
    }
    tw_.resize(n / 2);
    const double two_pi = 6.283185307179586476925286766559;
    for (int k = 0; k < n / 2; ++k) {
      double a = -two_pi * k / n;
      tw_[k] = std::complex<T>(static_cast<T>(std::cos(a)), static_cast<T>(std::sin(a)));
    }
  }

  int size() const { return n_; }

  void forward(std::complex<T>* a) const {
    for (int i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
    for (int len = 2; len <= n_; len <<= 1) {
      int half = len >> 1;
      int step = n_ / len;
      for (int i = 0; i < n_; i += len) {
        for (int j = 0; j < half; ++j) {
          std::complex<T> u = a[i + j];
          std::complex<T> w = tw_[j * step] * a[i + j + half];
          a[i + j] = u + w;
          a[i + j + half] = u - w;
        }
      }
    }
  }

 private:
  int n_;
  std::vector<int> rev_;
  std::vector<std::complex<T>> tw_;
};

}  // namespace vcpipe
