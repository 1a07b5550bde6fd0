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
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "vcpipe/errors.hpp"

namespace vcpipe {

/// Decoded RIFF/WAVE payload, interleaved, scaled to [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<float> samples;  // interleaved, frames() * channels entries

  size_t frames() const { return channels > 0 ? samples.size() / channels : 0; }
};

namespace detail {

inline uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace detail

/// Reads a PCM WAV file. Supports 16-bit integer and 32-bit IEEE float data.
inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, bits = 0;
  int channels = 0, rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const uint8_t* hdr = buf.data() + pos;
    uint32_t chunk_len = detail::read_u32(hdr + 4);
    const uint8_t* body = hdr + 8;
    if (pos + 8 + chunk_len > buf.size()) chunk_len = static_cast<uint32_t>(buf.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw IoError("truncated fmt chunk: " + path);
      format = detail::read_u16(body);
      channels = detail::read_u16(body + 2);
      rate = static_cast<int>(detail::read_u32(body + 4));
      bits = detail::read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) throw IoError("missing fmt or data chunk: " + path);
  if (channels <= 0 || rate <= 0) throw IoError("bad wav header: " + path);

  WavData out;
  out.sample_rate = rate;
  out.channels = channels;
  if (format == 1 && bits == 16) {
    size_t count = data_len / 2;
    out.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      int16_t s = static_cast<int16_t>(detail::read_u16(data + 2 * i));
      out.samples[i] = static_cast<float>(s) / 32767.0f;
    }
  } else if (format == 3 && bits == 32) {
    size_t count = data_len / 4;
    out.samples.resize(count);
    for (size_t i = 0; i < count; ++i) {
      uint32_t u = detail::read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      out.samples[i] = f;
    }
  } else {
    throw IoError("unsupported wav encoding (want 16-bit PCM or 32-bit float): " + path);
  }
  out.samples.resize(out.samples.size() - out.samples.size() % channels);
  return out;
}

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] before quantization.
inline void write_wav_pcm16(const std::string& path, const float* samples, size_t count,
                            int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open wav file for writing: " + path);

  auto put_u32 = [&](uint32_t x) {
    char b[4] = {char(x), char(x >> 8), char(x >> 16), char(x >> 24)};
    out.write(b, 4);
  };
  auto put_u16 = [&](uint16_t x) {
    char b[2] = {char(x), char(x >> 8)};
    out.write(b, 2);
  };

  uint32_t data_bytes = static_cast<uint32_t>(count * 2);
  out.write("RIFF", 4);
  put_u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<uint32_t>(sample_rate));
  put_u32(static_cast<uint32_t>(sample_rate * 2));
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_bytes);
  for (size_t i = 0; i < count; ++i) {
    float s = samples[i];
    if (s > 1.0f) s = 1.0f;
    if (s < -1.0f) s = -1.0f;
    int q = static_cast<int>(std::lround(s * 32767.0f));
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace vcpipe
