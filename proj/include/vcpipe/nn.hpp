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
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcpipe/autograd.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/tensor.hpp"

namespace vcpipe {

/// Named trainable tensor plus its Adam state. Parameters live in float and
/// are cast to the tape's scalar type on use, so tests can drive the same
/// modules in double for finite-difference checks.
struct Param {
  std::string name;
  Tensor<float> value;
  Tensor<float> adam_m, adam_v;  // sized lazily by the optimizer
  bool trainable = true;
};

inline void init_normal(Tensor<float>& t, std::mt19937_64& rng, float stddev) {
  std::normal_distribution<float> d(0.0f, stddev);
  for (auto& x : t.v) x = d(rng);
}

inline void init_uniform(Tensor<float>& t, std::mt19937_64& rng, float limit) {
  std::uniform_real_distribution<float> d(-limit, limit);
  for (auto& x : t.v) x = d(rng);
}

/// Weight scale for a layer whose every output sums `fan` input terms; keeps
/// activation magnitudes roughly constant through the stack at initialisation.
inline float fan_in_std(int fan) { return 1.0f / std::sqrt(static_cast<float>(fan)); }

/// Binds parameters to tape nodes for one forward/backward pass. Each
/// parameter enters the tape once; repeated use() returns the same node, so
/// gradients from all uses accumulate on it.
template <typename T>
struct Ctx {
  Tape<T>& tape;
  bool train = true;

  std::vector<Param*> bound;
  std::vector<int> node_of;

  explicit Ctx(Tape<T>& tp, bool train_mode = true) : tape(tp), train(train_mode) {}

  int use(Param& p) {
    auto it = memo_.find(&p);
    if (it != memo_.end()) return it->second;
    int id = tape.input(p.value.template cast<T>(), train && p.trainable);
    memo_.emplace(&p, id);
    bound.push_back(&p);
    node_of.push_back(id);
    return id;
  }

 private:
  std::unordered_map<const Param*, int> memo_;
};

struct Linear {
  Param w;  // [1, out, in]
  Param b;  // [1, out, 1]
  bool has_bias = true;
  int in = 0, out = 0;

  void init(const std::string& name, int in_dim, int out_dim, bool bias, std::mt19937_64& rng) {
    in = in_dim;
    out = out_dim;
    has_bias = bias;
    w.name = name + ".w";
    w.value = Tensor<float>(1, out, in);
    float lim = std::sqrt(1.0f / static_cast<float>(in));
    init_uniform(w.value, rng, lim);
    if (has_bias) {
      b.name = name + ".b";
      b.value = Tensor<float>(1, out, 1);
      init_uniform(b.value, rng, lim);
    }
  }

  /// Small-weight restart for heads that should start near the identity or
  /// near zero (conditioning projections, posterior heads).
  void reinit_small(std::mt19937_64& rng, float stddev) {
    init_normal(w.value, rng, stddev);
    if (has_bias) std::fill(b.value.v.begin(), b.value.v.end(), 0.0f);
  }

  template <typename T>
  int apply(Ctx<T>& cx, int x) {
    return cx.tape.linear(x, cx.use(w), has_bias ? cx.use(b) : -1);
  }

  void collect(std::vector<Param*>* ps) {
    ps->push_back(&w);
    if (has_bias) ps->push_back(&b);
  }
};

struct Conv1d {
  Param w;  // [1, cout, cin*k]
  Param b;  // [1, cout, 1]
  bool has_bias = true;
  int cin = 0, cout = 0, k = 1, stride = 1, dilation = 1;
  int pad_left = 0, pad_right = 0;
  PadMode pad_mode = PadMode::kZero;

  void init(const std::string& name, int cin_, int cout_, int k_, int stride_, int dilation_,
            int pl, int pr, PadMode mode, bool bias, std::mt19937_64& rng,
            float wstd = 0.01f) {
    cin = cin_;
    cout = cout_;
    k = k_;
    stride = stride_;
    dilation = dilation_;
    pad_left = pl;
    pad_right = pr;
    pad_mode = mode;
    has_bias = bias;
    w.name = name + ".w";
    w.value = Tensor<float>(1, cout, cin * k);
    init_normal(w.value, rng, wstd);
    if (has_bias) {
      b.name = name + ".b";
      b.value = Tensor<float>(1, cout, 1);  // zero
    }
  }

  template <typename T>
  int apply(Ctx<T>& cx, int x) {
    int h = (pad_left || pad_right) ? cx.tape.pad1d(x, pad_left, pad_right, pad_mode) : x;
    return cx.tape.conv1d(h, cx.use(w), has_bias ? cx.use(b) : -1, k, stride, dilation);
  }

  void collect(std::vector<Param*>* ps) {
    ps->push_back(&w);
    if (has_bias) ps->push_back(&b);
  }
};

struct ConvTranspose1d {
  Param w;  // [1, cin, cout*k]
  Param b;  // [1, cout, 1]
  bool has_bias = true;
  int cin = 0, cout = 0, k = 1, stride = 1;
  int pad_left = 0, pad_right = 0;  // out = (in-1)*stride + k - pl - pr

  void init(const std::string& name, int cin_, int cout_, int k_, int stride_, int pl, int pr,
            bool bias, std::mt19937_64& rng, float wstd = 0.01f) {
    cin = cin_;
    cout = cout_;
    k = k_;
    stride = stride_;
    pad_left = pl;
    pad_right = pr;
    has_bias = bias;
    w.name = name + ".w";
    w.value = Tensor<float>(1, cin, cout * k);
    init_normal(w.value, rng, wstd);
    if (has_bias) {
      b.name = name + ".b";
      b.value = Tensor<float>(1, cout, 1);  // zero
    }
  }

  template <typename T>
  int apply(Ctx<T>& cx, int x) {
    return cx.tape.conv_transpose1d(x, cx.use(w), has_bias ? cx.use(b) : -1, k, stride, pad_left,
                                    pad_right);
  }

  void collect(std::vector<Param*>* ps) {
    ps->push_back(&w);
    if (has_bias) ps->push_back(&b);
  }
};

inline size_t param_count(const std::vector<Param*>& ps) {
  size_t n = 0;
  for (const Param* p : ps) n += p->value.size();
  return n;
}

/// Checkpoint/optimizer lookups key on names, so they must be unique.
inline void check_unique_names(const std::vector<Param*>& ps) {
  std::unordered_map<std::string, int> seen;
  for (const Param* p : ps)
    if (++seen[p->name] > 1) throw ContractError("duplicate parameter name: " + p->name);
}

}  // namespace vcpipe
