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

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vcpipe/nn.hpp"

namespace vcpipe {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

/// Everything a training run needs besides the tensors themselves. The run
/// configuration rides along verbatim so a converter can rebuild the model
/// before loading weights; its hash guards against silently loading weights
/// into a different architecture.
struct CheckpointMeta {
  uint32_t version = 1;
  uint64_t config_hash = 0;
  int epoch = -1;
  long long gen_steps = 0;
  long long disc_steps = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::string config_text;  // run configuration, verbatim
  std::string rng_state;    // serialized training RNG
};

namespace detail {

constexpr char kCheckpointMagic[4] = {'V', 'C', 'P', 'K'};

template <typename V>
void write_pod(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw IoError("checkpoint: truncated file");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const uint64_t n = read_pod<uint64_t>(is);
  if (n > (1ull << 32)) throw IoError("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("checkpoint: truncated file");
  return s;
}

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
  write_pod<int32_t>(os, t.n);
  write_pod<int32_t>(os, t.c);
  write_pod<int32_t>(os, t.t);
  os.write(reinterpret_cast<const char*>(t.v.data()),
           static_cast<std::streamsize>(t.v.size() * sizeof(float)));
}

inline Tensor<float> read_tensor(std::istream& is) {
  const int32_t n = read_pod<int32_t>(is);
  const int32_t c = read_pod<int32_t>(is);
  const int32_t t = read_pod<int32_t>(is);
  if (n < 0 || c < 0 || t < 0) throw IoError("checkpoint: negative tensor dims");
  Tensor<float> out(n, c, t);
  is.read(reinterpret_cast<char*>(out.v.data()),
          static_cast<std::streamsize>(out.v.size() * sizeof(float)));
  if (!is) throw IoError("checkpoint: truncated file");
  return out;
}

inline void read_magic(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kCheckpointMagic))
    throw IoError("checkpoint: bad magic (not a checkpoint file)");
}

inline CheckpointMeta read_meta(std::istream& is) {
  read_magic(is);
  CheckpointMeta meta;
  meta.version = read_pod<uint32_t>(is);
  if (meta.version != 1)
    throw IoError("checkpoint: unsupported version " + std::to_string(meta.version));
  meta.config_hash = read_pod<uint64_t>(is);
  meta.epoch = read_pod<int32_t>(is);
  meta.gen_steps = read_pod<int64_t>(is);
  meta.disc_steps = read_pod<int64_t>(is);
  meta.best_val = read_pod<double>(is);
  meta.config_text = read_string(is);
  meta.rng_state = read_string(is);
  return meta;
}

}  // namespace detail

/// Persist metadata plus every parameter's value and optimizer moments.
/// The parameter list defines the architecture: frozen-by-construction
/// modules (the content encoder) own no Param objects and never appear here.
inline void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                            const std::vector<Param*>& params) {
  check_unique_names(params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot write " + path);
  os.write(detail::kCheckpointMagic, 4);
  detail::write_pod<uint32_t>(os, meta.version);
  detail::write_pod<uint64_t>(os, meta.config_hash);
  detail::write_pod<int32_t>(os, meta.epoch);
  detail::write_pod<int64_t>(os, meta.gen_steps);
  detail::write_pod<int64_t>(os, meta.disc_steps);
  detail::write_pod<double>(os, meta.best_val);
  detail::write_string(os, meta.config_text);
  detail::write_string(os, meta.rng_state);
  detail::write_pod<uint32_t>(os, static_cast<uint32_t>(params.size()));
  for (const Param* p : params) {
    detail::write_string(os, p->name);
    detail::write_tensor(os, p->value);
    detail::write_tensor(os, p->adam_m);
    detail::write_tensor(os, p->adam_v);
  }
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

/// Read only the metadata (cheap; used to rebuild the model for a full load).
inline CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  return detail::read_meta(is);
}

/// Load a checkpoint into an existing parameter set. The stored tensors must
/// match the given parameters name-for-name and shape-for-shape. A config
/// hash different from `expected_hash` is refused unless `force` is set.
inline CheckpointMeta load_checkpoint(const std::string& path, const std::vector<Param*>& params,
                                      uint64_t expected_hash, bool force = false) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  CheckpointMeta meta = detail::read_meta(is);
  if (meta.config_hash != expected_hash && !force)
    throw ContractError("checkpoint: config hash mismatch (stored " +
                        std::to_string(meta.config_hash) + ", expected " +
                        std::to_string(expected_hash) + "); pass --force to override");

  const uint32_t count = detail::read_pod<uint32_t>(is);
  if (count != params.size())
    throw ContractError("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                        std::to_string(params.size()));
  std::unordered_map<std::string, Param*> by_name;
  for (Param* p : params) by_name.emplace(p->name, p);

  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = detail::read_string(is);
    Tensor<float> value = detail::read_tensor(is);
    Tensor<float> m = detail::read_tensor(is);
    Tensor<float> v = detail::read_tensor(is);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("checkpoint: unexpected tensor " + name);
    Param* p = it->second;
    if (value.n != p->value.n || value.c != p->value.c || value.t != p->value.t)
      throw ContractError("checkpoint: shape mismatch for " + name);
    p->value = std::move(value);
    p->adam_m = std::move(m);
    p->adam_v = std::move(v);
    by_name.erase(it);
  }
  return meta;
}

}  // namespace vcpipe
