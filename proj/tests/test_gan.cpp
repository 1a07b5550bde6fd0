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
#include <random>

#include "vcpipe/discriminator.hpp"
#include "vcpipe/generator.hpp"

using namespace vcpipe;

namespace {

GeneratorConfig small_gen_config() {
  GeneratorConfig cfg;
  cfg.in_channels = 12;
  cfg.cond_dim = 8;
  cfg.base_channels = 32;
  cfg.dilations = {1, 3};
  return cfg;
}

DiscConfig small_disc_config() {
  DiscConfig cfg;
  cfg.periods = {2, 3, 5};
  cfg.mpd_channels = {4, 8, 8, 8};
  cfg.msd_scales = 2;
  cfg.msd_channels = {4, 8, 8, 8};
  return cfg;
}

Tensor<float> rand_tensor(int n, int c, int t, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor<float> x(n, c, t);
  for (auto& v : x.v) v = u(rng);
  return x;
}

SpeakerEmbedding rand_embedding(int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  SpeakerEmbedding e;
  e.e.resize(dim);
  for (auto& v : e.e) v = g(rng);
  return e;
}

Waveform rand_wave(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  Waveform w;
  w.sample_rate = 24000;
  w.samples.resize(n);
  for (auto& v : w.samples) v = u(rng);
  return w;
}

}  // namespace

TEST_CASE("generator config invariants") {
  GeneratorConfig cfg;
  CHECK(cfg.hop() == 960);
  CHECK_NOTHROW(cfg.validate());

  GeneratorConfig bad = cfg;
  bad.upsample = {10, 8, 4, 4};  // product 1280
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  GeneratorConfig shallow = cfg;
  shallow.base_channels = 8;  // halving four times hits zero channels
  CHECK_THROWS_AS(shallow.validate(), ConfigError);
}

TEST_CASE("generated length is frames x 960") {
  std::mt19937_64 rng(11);
  Generator gen(small_gen_config(), rng);
  for (int frames : {1, 3, 25}) {
    Tensor<float> feats = rand_tensor(1, 12, frames, 100 + frames);
    Waveform out = gen.generate(feats, rand_embedding(8, 7));
    CHECK(out.sample_rate == 24000);
    CHECK(static_cast<int>(out.samples.size()) == frames * 960);
  }
}

TEST_CASE("generator output stays strictly inside (-1, 1)") {
  std::mt19937_64 rng(12);
  Generator gen(small_gen_config(), rng);
  Tensor<float> feats = rand_tensor(1, 12, 25, 3);
  Waveform out = gen.generate(feats, rand_embedding(8, 4));
  REQUIRE(out.samples.size() == 24000);
  float peak = 0.0f;
  for (float v : out.samples) peak = std::max(peak, std::fabs(v));
  CHECK(peak < 1.0f);
}

TEST_CASE("speaker embedding changes the output at a random init") {
  std::mt19937_64 rng(13);
  Generator gen(small_gen_config(), rng);
  Tensor<float> feats = rand_tensor(1, 12, 5, 9);
  Waveform a = gen.generate(feats, rand_embedding(8, 21));
  Waveform b = gen.generate(feats, rand_embedding(8, 22));
  REQUIRE(a.samples.size() == b.samples.size());
  float linf = 0.0f;
  for (size_t i = 0; i < a.samples.size(); ++i)
    linf = std::max(linf, std::fabs(a.samples[i] - b.samples[i]));
  CHECK(linf > 0.0f);
}

TEST_CASE("gradient reaches the speaker embedding") {
  std::mt19937_64 rng(14);
  Generator gen(small_gen_config(), rng);
  Tape<double> tape;
  Ctx<double> cx(tape, /*train_mode=*/true);
  Tensor<float> ff = rand_tensor(1, 12, 3, 31);
  Tensor<double> feats(1, 12, 3), emb(1, 8, 1);
  for (size_t i = 0; i < ff.v.size(); ++i) feats.v[i] = ff.v[i];
  std::mt19937_64 erng(32);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : emb.v) v = g(erng);
  int e = tape.input(std::move(emb), /*needs_grad=*/true);
  int y = gen.apply(cx, tape.input(std::move(feats), false), e);
  Tensor<double> zeros(1, 1, 3 * 960);
  int root = tape.mean_abs_diff(y, tape.input(std::move(zeros), false));
  tape.backward(root);
  double gnorm = 0.0;
  for (double v : tape.grad(e).v) gnorm += v * v;
  CHECK(gnorm > 0.0);
}

TEST_CASE("generator is deterministic") {
  std::mt19937_64 rng(15);
  Generator gen(small_gen_config(), rng);
  Tensor<float> feats = rand_tensor(1, 12, 4, 17);
  SpeakerEmbedding e = rand_embedding(8, 18);
  Waveform a = gen.generate(feats, e);
  Waveform b = gen.generate(feats, e);
  CHECK(a.samples == b.samples);
}

TEST_CASE("generator rejects mis-shaped inputs") {
  std::mt19937_64 rng(16);
  Generator gen(small_gen_config(), rng);
  CHECK_THROWS_AS(gen.generate(rand_tensor(1, 11, 4, 1), rand_embedding(8, 2)), ContractError);
  CHECK_THROWS_AS(gen.generate(rand_tensor(1, 12, 4, 1), rand_embedding(9, 2)), ContractError);

  Tape<float> tape;
  Ctx<float> cx(tape, false);
  int feats = tape.input(rand_tensor(1, 12, 4, 3), false);
  int wide = tape.input(rand_tensor(1, 8, 2, 4), false);  // embedding must have t == 1
  CHECK_THROWS_AS(gen.apply(cx, feats, wide), ContractError);
}

TEST_CASE("final generator convolution carries no bias") {
  std::mt19937_64 rng(17);
  Generator gen(small_gen_config(), rng);
  std::vector<Param*> ps;
  gen.collect(&ps);
  bool has_out_w = false, has_out_b = false, has_pre_b = false;
  for (const Param* p : ps) {
    if (p->name == "gen.out.w") has_out_w = true;
    if (p->name == "gen.out.b") has_out_b = true;
    if (p->name == "gen.pre.b") has_pre_b = true;
  }
  CHECK(has_out_w);
  CHECK_FALSE(has_out_b);
  CHECK(has_pre_b);  // interior convolutions keep their biases
  CHECK_NOTHROW(check_unique_names(ps));
}

TEST_CASE("discriminator ensemble is deterministic and well-shaped") {
  std::mt19937_64 rng(18);
  DiscEnsemble disc(small_disc_config(), rng);
  CHECK(disc.count() == 5);  // three periods + two scales
  Waveform w = rand_wave(24000, 41);
  auto a = discriminate(w, disc);
  auto b = discriminate(w, disc);
  REQUIRE(a.size() == 5);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    REQUIRE(a[i].feature_maps.size() == 5);  // four hidden maps + the final map
    for (size_t j = 0; j < a[i].feature_maps.size(); ++j) {
      CHECK_FALSE(a[i].feature_maps[j].empty());
      CHECK(a[i].feature_maps[j] == b[i].feature_maps[j]);
    }
  }
}

TEST_CASE("discriminator reacts to a perturbation") {
  std::mt19937_64 rng(19);
  DiscEnsemble disc(small_disc_config(), rng);
  Waveform w = rand_wave(4800, 43);
  Waveform v = w;
  v.samples[1234] += 0.1f;
  auto a = discriminate(w, disc);
  auto b = discriminate(v, disc);
  int changed = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    float linf = 0.0f;
    const auto& fa = a[i].feature_maps.back();
    const auto& fb = b[i].feature_maps.back();
    REQUIRE(fa.size() == fb.size());
    for (size_t j = 0; j < fa.size(); ++j) linf = std::max(linf, std::fabs(fa[j] - fb[j]));
    if (linf > 0.0f) ++changed;
  }
  CHECK(changed == static_cast<int>(a.size()));
}

TEST_CASE("discriminator rejects waveforms below its receptive field") {
  std::mt19937_64 rng(20);
  DiscEnsemble disc(small_disc_config(), rng);
  CHECK_THROWS_AS(discriminate(rand_wave(959, 5), disc), ContractError);
  Waveform empty;
  empty.sample_rate = 24000;
  CHECK_THROWS_AS(discriminate(empty, disc), EmptyInputError);
  CHECK_NOTHROW(discriminate(rand_wave(960, 6), disc));
}

TEST_CASE("discriminator config invariants") {
  DiscConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  DiscConfig bad = cfg;
  bad.periods = {1, 2};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  DiscConfig uneven = cfg;
  uneven.msd_kernels = {15, 21, 21};  // no longer matches the channel list
  CHECK_THROWS_AS(uneven.validate(), ConfigError);
}
