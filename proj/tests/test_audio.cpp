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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "vcpipe/audio.hpp"
#include "vcpipe/fft.hpp"
#include "vcpipe/resample.hpp"

using namespace vcpipe;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "vcpipe_test_audio";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::vector<float> sine(double hz, int rate, size_t n, float amp = 0.5f) {
  std::vector<float> x(n);
  for (size_t i = 0; i < n; ++i)
    x[i] = amp * static_cast<float>(std::sin(2.0 * M_PI * hz * i / rate));
  return x;
}

// Interleaved stereo PCM16 writer, test-local (the library only writes mono).
void write_stereo_pcm16(const std::string& path, const std::vector<float>& left,
                        const std::vector<float>& right, int rate) {
  std::vector<float> inter(left.size() * 2);
  for (size_t i = 0; i < left.size(); ++i) {
    inter[2 * i] = left[i];
    inter[2 * i + 1] = right[i];
  }
  std::ofstream out(path, std::ios::binary);
  auto put_u32 = [&](uint32_t x) { out.write(reinterpret_cast<char*>(&x), 4); };
  auto put_u16 = [&](uint16_t x) { out.write(reinterpret_cast<char*>(&x), 2); };
  uint32_t data_bytes = static_cast<uint32_t>(inter.size() * 2);
  out.write("RIFF", 4);
  put_u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);
  put_u16(2);
  put_u32(rate);
  put_u32(rate * 4);
  put_u16(4);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_bytes);
  for (float s : inter) {
    int q = static_cast<int>(std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f));
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
}

void write_float32_wav(const std::string& path, const std::vector<float>& x, int rate) {
  std::ofstream out(path, std::ios::binary);
  auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto put_u16 = [&](uint16_t v) { out.write(reinterpret_cast<char*>(&v), 2); };
  uint32_t data_bytes = static_cast<uint32_t>(x.size() * 4);
  out.write("RIFF", 4);
  put_u32(36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(3);  // IEEE float
  put_u16(1);
  put_u32(rate);
  put_u32(rate * 4);
  put_u16(4);
  put_u16(32);
  out.write("data", 4);
  put_u32(data_bytes);
  out.write(reinterpret_cast<const char*>(x.data()), data_bytes);
}

}  // namespace

TEST_CASE("resampled_length matches the rounding oracle") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    size_t n = 1 + rng() % 100000;
    int src = 8000 + static_cast<int>(rng() % 40000);
    int dst = 8000 + static_cast<int>(rng() % 40000);
    size_t expect = static_cast<size_t>(std::llround(static_cast<double>(n) * dst / src));
    REQUIRE(resampled_length(n, src, dst) == expect);
  }
}

TEST_CASE("load_audio: stereo 48k 1s to 24k gives 24000 samples") {
  auto path = temp_path("stereo48.wav");
  auto l = sine(440.0, 48000, 48000), r = sine(440.0, 48000, 48000, 0.25f);
  write_stereo_pcm16(path, l, r, 48000);
  Waveform w = load_audio(path, 24000);
  REQUIRE(w.sample_rate == 24000);
  REQUIRE(w.samples.size() == 24000);
}

TEST_CASE("load_audio: 16k half second to 24k gives 12000 samples") {
  auto path = temp_path("mono16k.wav");
  auto x = sine(200.0, 16000, 8000);
  Waveform src{x, 16000};
  save_audio(src, path);
  Waveform w = load_audio(path, 24000);
  REQUIRE(w.samples.size() == 12000);  // round(8000 * 24000 / 16000)
}

TEST_CASE("load_audio: already 24k mono passes through up to quantization") {
  auto path = temp_path("mono24k.wav");
  auto x = sine(330.0, 24000, 4800);
  save_audio(Waveform{x, 24000}, path);
  Waveform w = load_audio(path, 24000);
  REQUIRE(w.samples.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i)
    REQUIRE(std::fabs(w.samples[i] - x[i]) <= 1.0f / 32767.0f);
}

TEST_CASE("load_audio errors") {
  REQUIRE_THROWS_AS(load_audio(temp_path("does_not_exist.wav"), 24000), IoError);
  auto path = temp_path("empty.wav");
  write_float32_wav(path, {}, 24000);
  REQUIRE_THROWS_AS(load_audio(path, 24000), EmptyInputError);
  auto garbage = temp_path("garbage.wav");
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "this is not a wav file at all";
  }
  REQUIRE_THROWS_AS(load_audio(garbage, 24000), IoError);
}

TEST_CASE("float32 wavs with peak above 1 are normalized into [-1, 1]") {
  auto path = temp_path("loud_f32.wav");
  auto x = sine(150.0, 24000, 12000, 1.8f);
  write_float32_wav(path, x, 24000);
  Waveform w = load_audio(path, 24000);
  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::fabs(s));
  REQUIRE(peak <= 1.0f);
  REQUIRE(peak > 0.95f);
}

TEST_CASE("save/load round trip: silence decodes to zeros") {
  auto path = temp_path("silence.wav");
  Waveform w{std::vector<float>(1000, 0.0f), 24000};
  save_audio(w, path);
  Waveform back = load_audio(path, 24000);
  REQUIRE(back.samples.size() == 1000);
  for (float s : back.samples) REQUIRE(s == 0.0f);
}

TEST_CASE("save/load round trip: bounded by one quantization step") {
  auto path = temp_path("roundtrip.wav");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> x(5000);
  for (auto& s : x) s = u(rng);
  save_audio(Waveform{x, 24000}, path);
  Waveform back = load_audio(path, 24000);
  REQUIRE(back.samples.size() == x.size());
  float linf = 0.0f;
  for (size_t i = 0; i < x.size(); ++i) linf = std::max(linf, std::fabs(back.samples[i] - x[i]));
  REQUIRE(linf <= std::pow(2.0f, -15.0f));
}

TEST_CASE("save_audio: sine amplitude 0.5 within quantization error") {
  auto path = temp_path("sine_rt.wav");
  auto x = sine(440.0, 24000, 2400);
  save_audio(Waveform{x, 24000}, path);
  Waveform back = load_audio(path, 24000);
  for (size_t i = 0; i < x.size(); ++i)
    REQUIRE(std::fabs(back.samples[i] - x[i]) <= std::pow(2.0f, -15.0f));
}

TEST_CASE("save_audio rejects empty input and bad paths") {
  REQUIRE_THROWS_AS(save_audio(Waveform{{}, 24000}, temp_path("x.wav")), EmptyInputError);
  Waveform w{std::vector<float>(10, 0.1f), 24000};
  REQUIRE_THROWS_AS(save_audio(w, "/nonexistent_dir_zz/x.wav"), IoError);
}

TEST_CASE("resampling preserves duration across random rate pairs") {
  std::mt19937_64 rng(23);
  const int rates[] = {8000, 16000, 22050, 24000, 44100, 48000};
  for (int i = 0; i < 40; ++i) {
    int src = rates[rng() % 6], dst = rates[rng() % 6];
    size_t n = 500 + rng() % 30000;
    std::vector<float> x(n, 0.1f);
    auto y = resample(x, src, dst);
    double in_dur = static_cast<double>(n) / src;
    double out_dur = static_cast<double>(y.size()) / dst;
    REQUIRE(std::fabs(out_dur - in_dur) < 1.0 / dst);
  }
}

TEST_CASE("a tone survives 48k->24k resampling") {
  auto x = sine(440.0, 48000, 48000);
  auto y = resample(x, 48000, 24000);
  REQUIRE(y.size() == 24000);
  // correlate against the expected 440 Hz tone at 24 kHz, away from the edges
  double num = 0, da = 0, db = 0;
  for (size_t i = 1000; i + 1000 < y.size(); ++i) {
    double ref = 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 24000.0);
    num += y[i] * ref;
    da += y[i] * y[i];
    db += ref * ref;
  }
  REQUIRE(num / std::sqrt(da * db) > 0.999);
}

TEST_CASE("fft matches a naive dft") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {8, 64, 1024}) {
    Fft<double> fft(n);
    std::vector<std::complex<double>> a(n), ref(n);
    for (auto& z : a) z = {u(rng), u(rng)};
    for (int k = 0; k < n; ++k) {
      std::complex<double> acc = 0;
      for (int j = 0; j < n; ++j)
        acc += a[j] * std::exp(std::complex<double>(0, -2.0 * M_PI * k * j / n));
      ref[k] = acc;
    }
    fft.forward(a.data());
    for (int k = 0; k < n; ++k) REQUIRE(std::abs(a[k] - ref[k]) < 1e-9 * n);
  }
}
