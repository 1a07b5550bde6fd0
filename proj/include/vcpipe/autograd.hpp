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

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "vcpipe/errors.hpp"
#include "vcpipe/mel.hpp"
#include "vcpipe/tensor.hpp"

namespace vcpipe {

enum class PadMode { kZero, kReflect };

/// Reverse-mode tape over [N, C, T] tensors. Ops compute values eagerly and
/// record a backward closure; backward() walks the tape in reverse creation
/// order, so creation order is the topological order by construction.
/// One tape serves one forward/backward pass; build a fresh tape per step.
template <typename T>
class Tape {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapM = Eigen::Map<Mat>;
  using CMapM = Eigen::Map<const Mat>;

  int input(Tensor<T> v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, nullptr);
  }

  const Tensor<T>& val(int id) const { return nodes_[id].val; }

  Tensor<T>& grad(int id) {
    ensure_grad(id);
    return nodes_[id].grad;
  }

  // true once backward() actually deposited gradient storage for this node
  bool has_grad(int id) const { return !nodes_[id].grad.v.empty(); }

  size_t num_nodes() const { return nodes_.size(); }

  void backward(int root) {
    if (nodes_[root].val.size() != 1) throw ContractError("backward: root must be a scalar");
    ensure_grad(root);
    nodes_[root].grad.v[0] = T(1);
    for (int i = root; i >= 0; --i) {
      // A node with an untouched grad received no gradient (dead branch).
      if (nodes_[i].ng && nodes_[i].back && !nodes_[i].grad.v.empty()) nodes_[i].back(*this);
    }
  }

  // ---- elementwise ----

  int add(int a, int b) {
    check_same(a, b, "add");
    Tensor<T> y = nodes_[a].val;
    const auto& bv = nodes_[b].val.v;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += bv[i];
    return push(std::move(y), ng(a) || ng(b), [a, b, id = next_id()](Tape& tp) {
      const auto& g = tp.nodes_[id].grad.v;
      if (tp.ng(a)) {
        auto& da = tp.grad(a).v;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (tp.ng(b)) {
        auto& db = tp.grad(b).v;
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i];
      }
    });
  }

  int sub(int a, int b) {
    check_same(a, b, "sub");
    Tensor<T> y = nodes_[a].val;
    const auto& bv = nodes_[b].val.v;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] -= bv[i];
    return push(std::move(y), ng(a) || ng(b), [a, b, id = next_id()](Tape& tp) {
      const auto& g = tp.nodes_[id].grad.v;
      if (tp.ng(a)) {
        auto& da = tp.grad(a).v;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      }
      if (tp.ng(b)) {
        auto& db = tp.grad(b).v;
        for (size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }

  int mul(int a, int b) {
    check_same(a, b, "mul");
    Tensor<T> y = nodes_[a].val;
    const auto& bv = nodes_[b].val.v;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] *= bv[i];
    return push(std::move(y), ng(a) || ng(b), [a, b, id = next_id()](Tape& tp) {
      const auto& g = tp.nodes_[id].grad.v;
      const auto& av = tp.nodes_[a].val.v;
      const auto& bv2 = tp.nodes_[b].val.v;
      if (tp.ng(a)) {
        auto& da = tp.grad(a).v;
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv2[i];
      }
      if (tp.ng(b)) {
        auto& db = tp.grad(b).v;
        for (size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
      }
    });
  }

  /// y = scale * a + shift
  int affine_const(int a, T scale, T shift) {
    Tensor<T> y = nodes_[a].val;
    for (auto& x : y.v) x = scale * x + shift;
    return push(std::move(y), ng(a), [a, scale, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad.v;
      auto& da = tp.grad(a).v;
      for (size_t i = 0; i < g.size(); ++i) da[i] += scale * g[i];
    });
  }

  int exp_(int a) {
    Tensor<T> y = nodes_[a].val;
    for (auto& x : y.v) x = std::exp(x);
    return push(std::move(y), ng(a), [a, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad.v;
      const auto& yv = tp.nodes_[id].val.v;
      auto& da = tp.grad(a).v;
      for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * yv[i];
    });
  }

  int tanh_(int a) {
    Tensor<T> y = nodes_[a].val;
    for (auto& x : y.v) x = std::tanh(x);
    return push(std::move(y), ng(a), [a, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad.v;
      const auto& yv = tp.nodes_[id].val.v;
      auto& da = tp.grad(a).v;
      for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (T(1) - yv[i] * yv[i]);
    });
  }

  int leaky_relu(int a, T slope) {
    Tensor<T> y = nodes_[a].val;
    for (auto& x : y.v)
      if (x < T(0)) x *= slope;
    return push(std::move(y), ng(a), [a, slope, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad.v;
      const auto& av = tp.nodes_[a].val.v;
      auto& da = tp.grad(a).v;
      for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * (av[i] >= T(0) ? T(1) : slope);
    });
  }

  /// Per-channel affine from a conditioning vector: y = x * gamma + beta,
  /// gamma/beta shaped [N, C, 1] and broadcast along time.
  int film(int x, int gamma, int beta) {
    const auto& xv = nodes_[x].val;
    const auto& gv = nodes_[gamma].val;
    const auto& bv = nodes_[beta].val;
    if (gv.n != xv.n || gv.c != xv.c || gv.t != 1 || !gv.same_shape(bv))
      throw ContractError("film: conditioning must be [N, C, 1]");
    Tensor<T> y(xv.n, xv.c, xv.t);
    for (int i = 0; i < xv.n; ++i)
      for (int ch = 0; ch < xv.c; ++ch) {
        T gm = gv.at(i, ch, 0), bt = bv.at(i, ch, 0);
        const T* xr = xv.row(i, ch);
        T* yr = y.row(i, ch);
        for (int t = 0; t < xv.t; ++t) yr[t] = xr[t] * gm + bt;
      }
    return push(std::move(y), ng(x) || ng(gamma) || ng(beta),
                [x, gamma, beta, id = next_id()](Tape& tp) {
                  const auto& g = tp.nodes_[id].grad;
                  const auto& xv2 = tp.nodes_[x].val;
                  const auto& gv2 = tp.nodes_[gamma].val;
                  for (int i = 0; i < xv2.n; ++i)
                    for (int ch = 0; ch < xv2.c; ++ch) {
                      const T* gr = g.row(i, ch);
                      const T* xr = xv2.row(i, ch);
                      if (tp.ng(x)) {
                        T gm = gv2.at(i, ch, 0);
                        T* dxr = tp.grad(x).row(i, ch);
                        for (int t = 0; t < xv2.t; ++t) dxr[t] += gr[t] * gm;
                      }
                      if (tp.ng(gamma)) {
                        T acc = 0;
                        for (int t = 0; t < xv2.t; ++t) acc += gr[t] * xr[t];
                        tp.grad(gamma).at(i, ch, 0) += acc;
                      }
                      if (tp.ng(beta)) {
                        T acc = 0;
                        for (int t = 0; t < xv2.t; ++t) acc += gr[t];
                        tp.grad(beta).at(i, ch, 0) += acc;
                      }
                    }
                });
  }

  // ---- linear / conv ----

  /// x: [N, Cin, 1], w: [1, Cout, Cin], b: [1, Cout, 1] or -1 -> y: [N, Cout, 1]
  int linear(int x, int w, int b) {
    const auto& xv = nodes_[x].val;
    const auto& wv = nodes_[w].val;
    if (xv.t != 1 || wv.n != 1 || wv.t != xv.c) throw ContractError("linear: shape mismatch");
    const int N = xv.n, cin = xv.c, cout = wv.c;
    Tensor<T> y(N, cout, 1);
    CMapM X(xv.data(), N, cin);
    CMapM W(wv.data(), cout, cin);
    MapM Y(y.data(), N, cout);
    Y.noalias() = X * W.transpose();
    if (b >= 0) {
      const auto& bv = nodes_[b].val;
      if (bv.n != 1 || bv.c != cout || bv.t != 1) throw ContractError("linear: bad bias shape");
      for (int i = 0; i < N; ++i)
        for (int o = 0; o < cout; ++o) y.at(i, o, 0) += bv.at(0, o, 0);
    }
    bool g = ng(x) || ng(w) || (b >= 0 && ng(b));
    return push(std::move(y), g, [x, w, b, N, cin, cout, id = next_id()](Tape& tp) {
      CMapM G(tp.nodes_[id].grad.data(), N, cout);
      if (tp.ng(x)) {
        CMapM W2(tp.nodes_[w].val.data(), cout, cin);
        MapM DX(tp.grad(x).data(), N, cin);
        DX.noalias() += G * W2;
      }
      if (tp.ng(w)) {
        CMapM X2(tp.nodes_[x].val.data(), N, cin);
        MapM DW(tp.grad(w).data(), cout, cin);
        DW.noalias() += G.transpose() * X2;
      }
      if (b >= 0 && tp.ng(b)) {
        auto& db = tp.grad(b);
        for (int i = 0; i < N; ++i)
          for (int o = 0; o < cout; ++o) db.at(0, o, 0) += G(i, o);
      }
    });
  }

  static int conv1d_out_len(int t_in, int k, int stride, int dilation) {
    int span = (k - 1) * dilation + 1;
    return (t_in - span) / stride + 1;
  }

  /// Unpadded 1-D convolution. x: [N, Cin, T], w: [1, Cout, Cin*k],
  /// b: [1, Cout, 1] or -1. Callers pad explicitly via pad1d.
  int conv1d(int x, int w, int b, int k, int stride, int dilation) {
    const auto& xv = nodes_[x].val;
    const auto& wv = nodes_[w].val;
    if (wv.n != 1 || wv.t % k != 0 || wv.t / k != xv.c)
      throw ContractError("conv1d: weight shape mismatch");
    const int N = xv.n, cin = xv.c, cout = wv.c, tin = xv.t;
    const int span = (k - 1) * dilation + 1;
    if (tin < span) throw ContractError("conv1d: input shorter than kernel span");
    const int tout = conv1d_out_len(tin, k, stride, dilation);
    Tensor<T> y(N, cout, tout);

    Mat col(cin * k, tout);
    CMapM W(wv.data(), cout, cin * k);
    for (int i = 0; i < N; ++i) {
      im2col(xv, i, k, stride, dilation, tout, col);
      MapM Y(y.row(i, 0), cout, tout);
      Y.noalias() = W * col;
    }
    if (b >= 0) {
      const auto& bv = nodes_[b].val;
      if (bv.c != cout) throw ContractError("conv1d: bad bias shape");
      for (int i = 0; i < N; ++i)
        for (int o = 0; o < cout; ++o) {
          T* yr = y.row(i, o);
          T bb = bv.at(0, o, 0);
          for (int t = 0; t < tout; ++t) yr[t] += bb;
        }
    }
    bool g = ng(x) || ng(w) || (b >= 0 && ng(b));
    return push(std::move(y), g,
                [x, w, b, k, stride, dilation, N, cin, cout, tout, id = next_id()](Tape& tp) {
                  Mat col(cin * k, tout);
                  const auto& xv2 = tp.nodes_[x].val;
                  for (int i = 0; i < N; ++i) {
                    CMapM G(tp.nodes_[id].grad.row(i, 0), cout, tout);
                    if (tp.ng(w)) {
                      im2col(xv2, i, k, stride, dilation, tout, col);
                      MapM DW(tp.grad(w).data(), cout, cin * k);
                      DW.noalias() += G * col.transpose();
                    }
                    if (tp.ng(x)) {
                      Mat dcol(cin * k, tout);
                      CMapM W2(tp.nodes_[w].val.data(), cout, cin * k);
                      dcol.noalias() = W2.transpose() * G;
                      auto& dx = tp.grad(x);
                      for (int ci = 0; ci < cin; ++ci) {
                        T* dxr = dx.row(i, ci);
                        for (int kk = 0; kk < k; ++kk) {
                          const int base = kk * dilation;
                          for (int t = 0; t < tout; ++t)
                            dxr[base + t * stride] += dcol(ci * k + kk, t);
                        }
                      }
                    }
                    if (b >= 0 && tp.ng(b)) {
                      auto& db = tp.grad(b);
                      for (int o = 0; o < cout; ++o) db.at(0, o, 0) += G.row(o).sum();
                    }
                  }
                });
  }

  /// Transposed 1-D convolution. x: [N, Cin, T], w: [1, Cin, Cout*k].
  /// out_len = (T-1)*stride + k - pad_left - pad_right.
  int conv_transpose1d(int x, int w, int b, int k, int stride, int pad_left, int pad_right) {
    const auto& xv = nodes_[x].val;
    const auto& wv = nodes_[w].val;
    if (wv.n != 1 || wv.c != xv.c || wv.t % k != 0)
      throw ContractError("conv_transpose1d: weight shape mismatch");
    const int N = xv.n, cin = xv.c, cout = wv.t / k, tin = xv.t;
    const int tout = (tin - 1) * stride + k - pad_left - pad_right;
    if (tout <= 0) throw ContractError("conv_transpose1d: non-positive output length");
    Tensor<T> y(N, cout, tout);

    CMapM W(wv.data(), cin, cout * k);
    Mat gathered(cout * k, tin);
    for (int i = 0; i < N; ++i) {
      CMapM X(xv.row(i, 0), cin, tin);
      gathered.noalias() = W.transpose() * X;
      for (int o = 0; o < cout; ++o) {
        T* yr = y.row(i, o);
        for (int kk = 0; kk < k; ++kk) {
          const auto& grow = gathered.row(o * k + kk);
          for (int t = 0; t < tin; ++t) {
            int to = t * stride + kk - pad_left;
            if (to >= 0 && to < tout) yr[to] += grow(t);
          }
        }
      }
    }
    if (b >= 0) {
      const auto& bv = nodes_[b].val;
      if (bv.c != cout) throw ContractError("conv_transpose1d: bad bias shape");
      for (int i = 0; i < N; ++i)
        for (int o = 0; o < cout; ++o) {
          T* yr = y.row(i, o);
          T bb = bv.at(0, o, 0);
          for (int t = 0; t < tout; ++t) yr[t] += bb;
        }
    }
    bool g = ng(x) || ng(w) || (b >= 0 && ng(b));
    return push(std::move(y), g,
                [x, w, b, k, stride, pad_left, N, cin, cout, tin, tout, id = next_id()](Tape& tp) {
                  Mat dg(cout * k, tin);
                  for (int i = 0; i < N; ++i) {
                    const auto& gout = tp.nodes_[id].grad;
                    dg.setZero();
                    for (int o = 0; o < cout; ++o) {
                      const T* gr = gout.row(i, o);
                      for (int kk = 0; kk < k; ++kk) {
                        auto row = dg.row(o * k + kk);
                        for (int t = 0; t < tin; ++t) {
                          int to = t * stride + kk - pad_left;
                          if (to >= 0 && to < tout) row(t) = gr[to];
                        }
                      }
                    }
                    if (tp.ng(x)) {
                      CMapM W2(tp.nodes_[w].val.data(), cin, cout * k);
                      MapM DX(tp.grad(x).row(i, 0), cin, tin);
                      DX.noalias() += W2 * dg;
                    }
                    if (tp.ng(w)) {
                      CMapM X2(tp.nodes_[x].val.row(i, 0), cin, tin);
                      MapM DW(tp.grad(w).data(), cin, cout * k);
                      DW.noalias() += X2 * dg.transpose();
                    }
                    if (b >= 0 && tp.ng(b)) {
                      auto& db = tp.grad(b);
                      for (int o = 0; o < cout; ++o) {
                        const T* gr = tp.nodes_[id].grad.row(i, o);
                        T acc = 0;
                        for (int t = 0; t < tout; ++t) acc += gr[t];
                        db.at(0, o, 0) += acc;
                      }
                    }
                  }
                });
  }

  int pad1d(int x, int pad_left, int pad_right, PadMode mode) {
    const auto& xv = nodes_[x].val;
    if (pad_left < 0 || pad_right < 0) throw ContractError("pad1d: negative padding");
    if (mode == PadMode::kReflect && xv.t < 2 && (pad_left > 0 || pad_right > 0))
      throw ContractError("pad1d: reflect needs at least 2 samples");
    const int tout = xv.t + pad_left + pad_right;
    Tensor<T> y(xv.n, xv.c, tout);
    for (int i = 0; i < xv.n; ++i)
      for (int ch = 0; ch < xv.c; ++ch) {
        const T* xr = xv.row(i, ch);
        T* yr = y.row(i, ch);
        for (int t = 0; t < tout; ++t) {
          long long src = static_cast<long long>(t) - pad_left;
          if (src >= 0 && src < xv.t)
            yr[t] = xr[src];
          else
            yr[t] = (mode == PadMode::kZero) ? T(0) : xr[detail::reflect_index(src, xv.t)];
        }
      }
    return push(std::move(y), ng(x), [x, pad_left, mode, id = next_id()](Tape& tp) {
      if (!tp.ng(x)) return;
      const auto& g = tp.nodes_[id].grad;
      auto& dx = tp.grad(x);
      for (int i = 0; i < dx.n; ++i)
        for (int ch = 0; ch < dx.c; ++ch) {
          const T* gr = g.row(i, ch);
          T* dxr = dx.row(i, ch);
          for (int t = 0; t < g.t; ++t) {
            long long src = static_cast<long long>(t) - pad_left;
            if (src >= 0 && src < dx.t)
              dxr[src] += gr[t];
            else if (mode == PadMode::kReflect)
              dxr[detail::reflect_index(src, dx.t)] += gr[t];
          }
        }
    });
  }

  // ---- normalization ----

  /// Standardize over time per (item, channel).
  int instance_norm(int x, T eps) { return norm_impl(x, eps, /*over_time=*/true); }

  /// Standardize over channels per (item, time step).
  int feature_norm(int x, T eps) { return norm_impl(x, eps, /*over_time=*/false); }

  // ---- pooling / reshaping ----

  int avg_pool1d(int x, int k, int stride) {
    const auto& xv = nodes_[x].val;
    if (xv.t < k) throw ContractError("avg_pool1d: input shorter than kernel");
    const int tout = (xv.t - k) / stride + 1;
    Tensor<T> y(xv.n, xv.c, tout);
    for (int i = 0; i < xv.n; ++i)
      for (int ch = 0; ch < xv.c; ++ch) {
        const T* xr = xv.row(i, ch);
        T* yr = y.row(i, ch);
        for (int t = 0; t < tout; ++t) {
          T acc = 0;
          for (int j = 0; j < k; ++j) acc += xr[t * stride + j];
          yr[t] = acc / static_cast<T>(k);
        }
      }
    return push(std::move(y), ng(x), [x, k, stride, id = next_id()](Tape& tp) {
      if (!tp.ng(x)) return;
      const auto& g = tp.nodes_[id].grad;
      auto& dx = tp.grad(x);
      const T inv = T(1) / static_cast<T>(k);
      for (int i = 0; i < dx.n; ++i)
        for (int ch = 0; ch < dx.c; ++ch) {
          const T* gr = g.row(i, ch);
          T* dxr = dx.row(i, ch);
          for (int t = 0; t < g.t; ++t)
            for (int j = 0; j < k; ++j) dxr[t * stride + j] += gr[t] * inv;
        }
    });
  }

  /// [N, 1, T] -> [N*p, 1, T/p]; slice (i*p + j) holds phase j of item i.
  /// Used by period discriminators; T must be a multiple of p.
  int phase_split(int x, int p) {
    const auto& xv = nodes_[x].val;
    if (xv.c != 1 || xv.t % p != 0) throw ContractError("phase_split: need [N,1,T] with p | T");
    const int tp_ = xv.t / p;
    Tensor<T> y(xv.n * p, 1, tp_);
    for (int i = 0; i < xv.n; ++i) {
      const T* xr = xv.row(i, 0);
      for (int j = 0; j < p; ++j) {
        T* yr = y.row(i * p + j, 0);
        for (int u = 0; u < tp_; ++u) yr[u] = xr[u * p + j];
      }
    }
    return push(std::move(y), ng(x), [x, p, tp_, id = next_id()](Tape& tp) {
      if (!tp.ng(x)) return;
      const auto& g = tp.nodes_[id].grad;
      auto& dx = tp.grad(x);
      for (int i = 0; i < dx.n; ++i) {
        T* dxr = dx.row(i, 0);
        for (int j = 0; j < p; ++j) {
          const T* gr = g.row(i * p + j, 0);
          for (int u = 0; u < tp_; ++u) dxr[u * p + j] += gr[u];
        }
      }
    });
  }

  /// [M, 1, T] -> [M/groups, 1, groups*T]: each run of `groups` adjacent batch
  /// rows becomes one row with the runs laid end to end. Row-major storage is
  /// unchanged; only the batch/time labels move, so the gradient passes through.
  int merge_rows(int a, int groups) {
    const auto& av = nodes_[a].val;
    if (av.c != 1 || groups < 1 || av.n % groups != 0)
      throw ContractError("merge_rows: need [M,1,T] with groups | M");
    Tensor<T> y(av.n / groups, 1, groups * av.t);
    y.v = av.v;
    return push(std::move(y), ng(a), [a, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad.v;
      auto& da = tp.grad(a).v;
      for (size_t i = 0; i < da.size(); ++i) da[i] += g[i];
    });
  }

  int concat_c(int a, int b) {
    const auto& av = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    if (av.n != bv.n || av.t != bv.t) throw ContractError("concat_c: batch/time mismatch");
    Tensor<T> y(av.n, av.c + bv.c, av.t);
    for (int i = 0; i < av.n; ++i) {
      for (int ch = 0; ch < av.c; ++ch)
        std::copy(av.row(i, ch), av.row(i, ch) + av.t, y.row(i, ch));
      for (int ch = 0; ch < bv.c; ++ch)
        std::copy(bv.row(i, ch), bv.row(i, ch) + bv.t, y.row(i, av.c + ch));
    }
    return push(std::move(y), ng(a) || ng(b), [a, b, id = next_id()](Tape& tp) {
      const auto& g = tp.nodes_[id].grad;
      const int ca = tp.nodes_[a].val.c;
      if (tp.ng(a)) {
        auto& da = tp.grad(a);
        for (int i = 0; i < da.n; ++i)
          for (int ch = 0; ch < da.c; ++ch) {
            const T* gr = g.row(i, ch);
            T* dr = da.row(i, ch);
            for (int t = 0; t < da.t; ++t) dr[t] += gr[t];
          }
      }
      if (tp.ng(b)) {
        auto& db = tp.grad(b);
        for (int i = 0; i < db.n; ++i)
          for (int ch = 0; ch < db.c; ++ch) {
            const T* gr = g.row(i, ca + ch);
            T* dr = db.row(i, ch);
            for (int t = 0; t < db.t; ++t) dr[t] += gr[t];
          }
      }
    });
  }

  // ---- reductions ----

  int mean_all(int a) {
    const auto& av = nodes_[a].val;
    double acc = 0;
    for (T x : av.v) acc += static_cast<double>(x);
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / av.v.size()));
    return push(std::move(y), ng(a), [a, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      T g = tp.nodes_[id].grad.v[0] / static_cast<T>(tp.nodes_[a].val.size());
      for (auto& d : tp.grad(a).v) d += g;
    });
  }

  /// [N, C, T] -> [N, 1, 1], mean over channels and time.
  int mean_over_ct(int a) { return reduce_ct(a, /*mean=*/true); }

  /// [N, C, T] -> [N, 1, 1], sum over channels and time.
  int sum_over_ct(int a) { return reduce_ct(a, /*mean=*/false); }

  /// mean(|a - b|) as a scalar.
  int mean_abs_diff(int a, int b) {
    check_same(a, b, "mean_abs_diff");
    const auto& av = nodes_[a].val.v;
    const auto& bv = nodes_[b].val.v;
    double acc = 0;
    for (size_t i = 0; i < av.size(); ++i) acc += std::fabs(static_cast<double>(av[i] - bv[i]));
    Tensor<T> y = Tensor<T>::scalar(static_cast<T>(acc / av.size()));
    return push(std::move(y), ng(a) || ng(b), [a, b, id = next_id()](Tape& tp) {
      const T g = tp.nodes_[id].grad.v[0] / static_cast<T>(tp.nodes_[a].val.size());
      const auto& av2 = tp.nodes_[a].val.v;
      const auto& bv2 = tp.nodes_[b].val.v;
      if (tp.ng(a)) {
        auto& da = tp.grad(a).v;
        for (size_t i = 0; i < av2.size(); ++i)
          da[i] += av2[i] >= bv2[i] ? g : -g;
      }
      if (tp.ng(b)) {
        auto& db = tp.grad(b).v;
        for (size_t i = 0; i < av2.size(); ++i)
          db[i] += av2[i] >= bv2[i] ? -g : g;
      }
    });
  }

  // ---- spectrogram ----

  /// Differentiable log-mel: x [N, 1, T] -> [N, n_mels, frames]. The
  /// computer must outlive the tape. Matches mel_spectrogram bit for bit
  /// on the same scalar type.
  int logmel(int x, const MelComputer<T>* mc) {
    const auto& xv = nodes_[x].val;
    if (xv.c != 1) throw ContractError("logmel: input must be [N, 1, T]");
    const int frames = mc->frames_for(static_cast<size_t>(xv.t));
    const int n_mels = mc->config().n_mels;
    Tensor<T> y(xv.n, n_mels, frames);
    auto caches = std::make_shared<std::vector<typename MelComputer<T>::Cache>>(xv.n);
    std::vector<T> out;
    for (int i = 0; i < xv.n; ++i) {
      mc->compute(xv.row(i, 0), static_cast<size_t>(xv.t), &out, ng(x) ? &(*caches)[i] : nullptr);
      // out is frames x n_mels; tensor wants mels as channels
      for (int f = 0; f < frames; ++f)
        for (int m = 0; m < n_mels; ++m) y.at(i, m, f) = out[static_cast<size_t>(f) * n_mels + m];
    }
    return push(std::move(y), ng(x), [x, mc, caches, frames, n_mels, id = next_id()](Tape& tp) {
      if (!tp.ng(x)) return;
      const auto& g = tp.nodes_[id].grad;
      auto& dx = tp.grad(x);
      std::vector<T> gframe(static_cast<size_t>(frames) * n_mels);
      for (int i = 0; i < dx.n; ++i) {
        for (int f = 0; f < frames; ++f)
          for (int m = 0; m < n_mels; ++m)
            gframe[static_cast<size_t>(f) * n_mels + m] = g.at(i, m, f);
        mc->backward((*caches)[i], gframe, dx.row(i, 0));
      }
    });
  }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    std::function<void(Tape&)> back;
    bool ng = false;
  };

  std::vector<Node> nodes_;

  int next_id() const { return static_cast<int>(nodes_.size()); }
  bool ng(int id) const { return nodes_[id].ng; }

  int push(Tensor<T> val, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.val = std::move(val);
    n.ng = needs_grad;
    if (needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  void ensure_grad(int id) {
    auto& n = nodes_[id];
    if (n.grad.v.empty()) n.grad = Tensor<T>(n.val.n, n.val.c, n.val.t);
  }

  void check_same(int a, int b, const char* op) const {
    if (!nodes_[a].val.same_shape(nodes_[b].val))
      throw ContractError(std::string(op) + ": shape mismatch");
  }

  static void im2col(const Tensor<T>& x, int item, int k, int stride, int dilation, int tout,
                     Mat& col) {
    for (int ci = 0; ci < x.c; ++ci) {
      const T* xr = x.row(item, ci);
      for (int kk = 0; kk < k; ++kk) {
        auto row = col.row(ci * k + kk);
        const int base = kk * dilation;
        for (int t = 0; t < tout; ++t) row(t) = xr[base + t * stride];
      }
    }
  }

  int norm_impl(int x, T eps, bool over_time) {
    const auto& xv = nodes_[x].val;
    const int groups = over_time ? xv.n * xv.c : xv.n * xv.t;
    const int len = over_time ? xv.t : xv.c;
    if (len < 1) throw ContractError("norm: empty axis");
    Tensor<T> y(xv.n, xv.c, xv.t);
    auto inv_std = std::make_shared<std::vector<T>>(groups);
    auto get = [&](const Tensor<T>& a, int grp, int j) -> T {
      if (over_time) return a.at(grp / xv.c, grp % xv.c, j);
      return a.at(grp / xv.t, j, grp % xv.t);
    };
    auto set = [&](Tensor<T>& a, int grp, int j, T v) {
      if (over_time)
        a.at(grp / xv.c, grp % xv.c, j) = v;
      else
        a.at(grp / xv.t, j, grp % xv.t) = v;
    };
    for (int grp = 0; grp < groups; ++grp) {
      double m = 0;
      for (int j = 0; j < len; ++j) m += static_cast<double>(get(xv, grp, j));
      m /= len;
      double var = 0;
      for (int j = 0; j < len; ++j) {
        double d = static_cast<double>(get(xv, grp, j)) - m;
        var += d * d;
      }
      var /= len;
      T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[grp] = is;
      for (int j = 0; j < len; ++j)
        set(y, grp, j, (get(xv, grp, j) - static_cast<T>(m)) * is);
    }
    return push(std::move(y), ng(x),
                [x, groups, len, over_time, inv_std, id = next_id()](Tape& tp) {
                  if (!tp.ng(x)) return;
                  const auto& yv = tp.nodes_[id].val;
                  const auto& g = tp.nodes_[id].grad;
                  auto& dx = tp.grad(x);
                  const int C = tp.nodes_[x].val.c, TT = tp.nodes_[x].val.t;
                  auto get = [&](const Tensor<T>& a, int grp, int j) -> T {
                    if (over_time) return a.at(grp / C, grp % C, j);
                    return a.at(grp / TT, j, grp % TT);
                  };
                  auto add = [&](Tensor<T>& a, int grp, int j, T v) {
                    if (over_time)
                      a.at(grp / C, grp % C, j) += v;
                    else
                      a.at(grp / TT, j, grp % TT) += v;
                  };
                  for (int grp = 0; grp < groups; ++grp) {
                    double gm = 0, gym = 0;
                    for (int j = 0; j < len; ++j) {
                      gm += static_cast<double>(get(g, grp, j));
                      gym += static_cast<double>(get(g, grp, j)) * static_cast<double>(get(yv, grp, j));
                    }
                    gm /= len;
                    gym /= len;
                    const T is = (*inv_std)[grp];
                    for (int j = 0; j < len; ++j) {
                      T gj = get(g, grp, j), yj = get(yv, grp, j);
                      add(dx, grp, j,
                          is * (gj - static_cast<T>(gm) - yj * static_cast<T>(gym)));
                    }
                  }
                });
  }

  int reduce_ct(int a, bool mean) {
    const auto& av = nodes_[a].val;
    Tensor<T> y(av.n, 1, 1);
    const size_t per = static_cast<size_t>(av.c) * av.t;
    for (int i = 0; i < av.n; ++i) {
      double acc = 0;
      const T* base = av.row(i, 0);
      for (size_t j = 0; j < per; ++j) acc += static_cast<double>(base[j]);
      y.at(i, 0, 0) = static_cast<T>(mean ? acc / per : acc);
    }
    return push(std::move(y), ng(a), [a, mean, per, id = next_id()](Tape& tp) {
      if (!tp.ng(a)) return;
      const auto& g = tp.nodes_[id].grad;
      auto& da = tp.grad(a);
      for (int i = 0; i < da.n; ++i) {
        T gi = g.at(i, 0, 0);
        if (mean) gi /= static_cast<T>(per);
        T* base = da.row(i, 0);
        for (size_t j = 0; j < per; ++j) base[j] += gi;
      }
    });
  }
};

}  // namespace vcpipe
