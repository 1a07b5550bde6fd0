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
#include <unordered_set>
#include <vector>

#include "vcpipe/nn.hpp"

namespace vcpipe {

/// Adam settings. The vocoder-style betas (0.8, 0.99) track fast-moving
/// adversarial gradients; the learning rate decays by `gamma` once per epoch.
struct AdamConfig {
  double lr0 = 2e-4;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double gamma = 0.995;

  void validate() const {
    if (lr0 <= 0) throw ConfigError("adam: lr0 must be positive");
    if (gamma <= 0 || gamma > 1) throw ConfigError("adam: gamma must be in (0, 1]");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw ConfigError("adam: betas must be in [0, 1)");
  }
};

/// Learning rate for a given epoch: lr0 scaled down by gamma once per epoch.
/// Built as a running product so consecutive epochs differ by exactly gamma.
inline double scheduled_lr(const AdamConfig& cfg, int epoch) {
  if (epoch < 0) throw ContractError("scheduler: negative epoch");
  double lr = cfg.lr0;
  for (int e = 0; e < epoch; ++e) lr *= cfg.gamma;
  return lr;
}

/// Adam over an explicit parameter set. Each side of the adversarial game
/// gets its own instance; a step touches only owned parameters that actually
/// received gradients on the given tape.
class Adam {
 public:
  Adam() = default;

  Adam(const AdamConfig& cfg, std::vector<Param*> params)
      : cfg_(cfg), params_(std::move(params)), owned_(params_.begin(), params_.end()) {
    cfg.validate();
    for (Param* p : params_) {
      if (p->adam_m.v.empty()) {
        p->adam_m = Tensor<float>(p->value.n, p->value.c, p->value.t);
        p->adam_v = Tensor<float>(p->value.n, p->value.c, p->value.t);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  const std::vector<Param*>& params() const { return params_; }
  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }

  /// Apply one update using the gradients backward() left on the tape.
  /// Parameters bound by other modules on the same tape are ignored.
  void step(const Ctx<float>& cx, Tape<float>& tape, double lr) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (size_t i = 0; i < cx.bound.size(); ++i) {
      Param* p = cx.bound[i];
      if (!owned_.count(p)) continue;
      const int id = cx.node_of[i];
      if (!tape.has_grad(id)) continue;
      const auto& g = tape.grad(id);
      for (size_t j = 0; j < p->value.v.size(); ++j) {
        const double gj = static_cast<double>(g.v[j]);
        const double m = cfg_.beta1 * p->adam_m.v[j] + (1.0 - cfg_.beta1) * gj;
        const double v = cfg_.beta2 * p->adam_v.v[j] + (1.0 - cfg_.beta2) * gj * gj;
        p->adam_m.v[j] = static_cast<float>(m);
        p->adam_v.v[j] = static_cast<float>(v);
        const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        p->value.v[j] = static_cast<float>(p->value.v[j] - update);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Param*> params_;
  std::unordered_set<Param*> owned_;
  long long steps_ = 0;
};

}  // namespace vcpipe
