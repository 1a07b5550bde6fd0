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
#include <cstddef>
#include <vector>

#include "vcpipe/errors.hpp"

namespace vcpipe {

/// Dense [batch, channels, time] tensor, row-major with time innermost.
/// Vectors are stored as [n, c, 1]; scalars as [1, 1, 1].
template <typename T>
struct Tensor {
  int n = 0, c = 0, t = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int t_)
      : n(n_), c(c_), t(t_), v(static_cast<size_t>(n_) * c_ * t_, T(0)) {
    if (n_ < 0 || c_ < 0 || t_ < 0) throw ContractError("tensor: negative dimension");
  }

  static Tensor zeros(int n, int c, int t) { return Tensor(n, c, t); }
  static Tensor full(int n, int c, int t, T x) {
    Tensor r(n, c, t);
    std::fill(r.v.begin(), r.v.end(), x);
    return r;
  }
  static Tensor scalar(T x) { return full(1, 1, 1, x); }

  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && t == o.t; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  // Pointer to the time series of batch item i, channel j.
  T* row(int i, int j) { return v.data() + (static_cast<size_t>(i) * c + j) * t; }
  const T* row(int i, int j) const { return v.data() + (static_cast<size_t>(i) * c + j) * t; }

  T& at(int i, int j, int k) { return v[(static_cast<size_t>(i) * c + j) * t + k]; }
  T at(int i, int j, int k) const { return v[(static_cast<size_t>(i) * c + j) * t + k]; }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> r(n, c, t);
    for (size_t i = 0; i < v.size(); ++i) r.v[i] = static_cast<U>(v[i]);
    return r;
  }
};

}  // namespace vcpipe
