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
#include <filesystem>
#include <fstream>
#include <random>

#include "vcpipe/content.hpp"

using vcpipe::CommandEncoder;
using vcpipe::ContentFeatures;
using vcpipe::F0Features;
using vcpipe::ToyEncoder;
using vcpipe::Waveform;

namespace {

Waveform noise(size_t samples, uint64_t seed, int rate = 24000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(samples);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-0.5f, 0.5f);
  for (auto& s : w.samples) s = d(rng);
  return w;
}

}  // namespace

TEST_CASE("toy encoder frame arithmetic") {
  ToyEncoder enc(7);
  CHECK(vcpipe::extract_content(noise(24000, 1), enc).frames == 25);  // 1 s
  CHECK(vcpipe::extract_content(noise(960, 2), enc).frames == 1);     // 40 ms
  CHECK(ToyEncoder::frames_for(959) == 0);
  CHECK(ToyEncoder::frames_for(1919) == 1);
  ContentFeatures f = vcpipe::extract_content(noise(24000, 1), enc);
  CHECK(f.dim == 256);
}

TEST_CASE("toy encoder is a pure function of samples and seed") {
  Waveform w = noise(4800, 3);
  ToyEncoder enc(11);
  ContentFeatures a = enc.encode(w);
  ContentFeatures b = enc.encode(w);
  REQUIRE(a.values.size() == b.values.size());
  for (size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);

  ToyEncoder other(12);
  ContentFeatures c = other.encode(w);
  bool any_diff = false;
  for (size_t i = 0; i < a.values.size(); ++i) any_diff |= a.values[i] != c.values[i];
  CHECK(any_diff);
}

TEST_CASE("toy encoder maps silence to constant rows") {
  Waveform w;
  w.sample_rate = 24000;
  w.samples.assign(960 * 5, 0.0f);
  ToyEncoder enc(21);
  ContentFeatures f = enc.encode(w);
  REQUIRE(f.frames == 5);
  for (int fr = 1; fr < f.frames; ++fr)
    for (int d = 0; d < f.dim; ++d) CHECK(f.at(fr, d) == f.at(0, d));
  for (float v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("content frame count stays within one of the 40 ms grid") {
  ToyEncoder enc(31);
  std::mt19937_64 rng(32);
  std::uniform_int_distribution<size_t> len(960, 48000);
  for (int trial = 0; trial < 20; ++trial) {
    size_t n = len(rng);
    ContentFeatures f = vcpipe::extract_content(noise(n, trial), enc);
    long long want = std::llround(n / 960.0);
    CHECK(std::llabs(f.frames - want) <= 1);
  }
}

TEST_CASE("content extraction rejects wrong sample rates") {
  ToyEncoder enc(41);
  Waveform w = noise(16000, 5, 16000);
  CHECK_THROWS_AS(vcpipe::extract_content(w, enc), vcpipe::ContractError);
}

TEST_CASE("command adapter round-trips through a subprocess") {
  namespace fs = std::filesystem;
  Waveform w = noise(2880, 6);  // 3 frames
  auto dir = fs::temp_directory_path();

  SECTION("parses frames and dims") {
    auto script = dir / "content_stub_ok.sh";
    {
      std::ofstream s(script);
      s << "#!/bin/sh\ncat <<EOF\n0.5 1.5 -2 0.25\n1 2 3 4\n-1 -2 -3 -4\nEOF\n";
    }
    fs::permissions(script, fs::perms::owner_all);
    CommandEncoder enc("stub-asr", script.string(), 4);
    ContentFeatures f = vcpipe::extract_content(w, enc);
    REQUIRE(f.frames == 3);
    REQUIRE(f.dim == 4);
    CHECK(f.at(0, 0) == 0.5f);
    CHECK(f.at(2, 3) == -4.0f);
    fs::remove(script);
  }
  SECTION("missing command is a configuration error") {
    CommandEncoder enc("stub-asr", "", 4);
    CHECK_THROWS_AS(vcpipe::extract_content(w, enc), vcpipe::ConfigError);
  }
  SECTION("unreachable backend is a configuration error") {
    CommandEncoder enc("stub-asr", "/nonexistent/asr", 4);
    CHECK_THROWS_AS(vcpipe::extract_content(w, enc), vcpipe::ConfigError);
  }
  SECTION("wrong width line is a contract error") {
    auto script = dir / "content_stub_wide.sh";
    {
      std::ofstream s(script);
      s << "#!/bin/sh\ncat <<EOF\n1 2 3 4 5\n1 2 3 4 5\n1 2 3 4 5\nEOF\n";
    }
    fs::permissions(script, fs::perms::owner_all);
    CommandEncoder enc("stub-asr", script.string(), 4);
    CHECK_THROWS_AS(vcpipe::extract_content(w, enc), vcpipe::ContractError);
    fs::remove(script);
  }
  SECTION("frame count off the grid is a contract error") {
    auto script = dir / "content_stub_count.sh";
    {
      std::ofstream s(script);
      s << "#!/bin/sh\ncat <<EOF\n1 2 3 4\nEOF\n";  // one frame for a 3-frame input
    }
    fs::permissions(script, fs::perms::owner_all);
    CommandEncoder enc("stub-asr", script.string(), 4);
    CHECK_THROWS_AS(vcpipe::extract_content(w, enc), vcpipe::ContractError);
    fs::remove(script);
  }
}

TEST_CASE("alignment truncates to the shorter stream") {
  auto mk_content = [](int frames, int dim) {
    ContentFeatures c;
    c.frames = frames;
    c.dim = dim;
    c.values.assign(static_cast<size_t>(frames) * dim, 0.0f);
    for (int f = 0; f < frames; ++f)
      for (int d = 0; d < dim; ++d) c.values[static_cast<size_t>(f) * dim + d] = f * 100.0f + d;
    return c;
  };
  auto mk_f0 = [](int frames, int ch) {
    F0Features f;
    f.frames = frames;
    f.channels = ch;
    f.values.assign(static_cast<size_t>(frames) * ch, 1.0f);
    return f;
  };

  SECTION("equal lengths unchanged") {
    auto [c, f] = vcpipe::align_features(mk_content(25, 8), mk_f0(25, 4));
    CHECK(c.frames == 25);
    CHECK(f.frames == 25);
  }
  SECTION("one frame dropped") {
    auto [c, f] = vcpipe::align_features(mk_content(25, 8), mk_f0(24, 4));
    CHECK(c.frames == 24);
    CHECK(f.frames == 24);
    CHECK(c.at(23, 7) == 2307.0f);  // surviving rows untouched
  }
  SECTION("content shorter") {
    auto [c, f] = vcpipe::align_features(mk_content(3, 8), mk_f0(7, 4));
    CHECK(c.frames == 3);
    CHECK(f.frames == 3);
  }
  SECTION("empty inputs rejected") {
    CHECK_THROWS_AS(vcpipe::align_features(mk_content(0, 8), mk_f0(7, 4)),
                    vcpipe::EmptyInputError);
    CHECK_THROWS_AS(vcpipe::align_features(mk_content(3, 8), mk_f0(0, 4)),
                    vcpipe::EmptyInputError);
  }
  SECTION("concatenation is well-defined after alignment") {
    auto [c, f] = vcpipe::align_features(mk_content(9, 8), mk_f0(7, 4));
    vcpipe::Tensor<float> ct = vcpipe::content_tensor(c);
    vcpipe::Tensor<float> ft = vcpipe::f0_features_tensor(f);
    vcpipe::Tape<float> tape;
    int cat = tape.concat_c(tape.input(ct, false), tape.input(ft, false));
    CHECK(tape.val(cat).c == 12);
    CHECK(tape.val(cat).t == 7);
    CHECK(tape.val(cat).at(0, 3, 2) == 203.0f);   // content channel 3, frame 2
    CHECK(tape.val(cat).at(0, 10, 5) == 1.0f);    // pitch channel
  }
}
