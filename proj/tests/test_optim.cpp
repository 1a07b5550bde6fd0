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
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "vcpipe/checkpoint.hpp"
#include "vcpipe/optimizer.hpp"

using namespace vcpipe;

namespace {

Param make_param(const std::string& name, int n, int c, int t, unsigned seed) {
  Param p;
  p.name = name;
  p.value = Tensor<float>(n, c, t);
  std::mt19937_64 rng(seed);
  init_normal(p.value, rng, 1.0f);
  return p;
}

// one gradient step of loss = mean(w^2) for every owned parameter
void quadratic_step(Adam& opt, std::vector<Param*> all, double lr) {
  Tape<float> tape;
  Ctx<float> cx(tape, true);
  int loss = -1;
  for (Param* p : all) {
    int term = tape.mean_all(tape.mul(cx.use(*p), cx.use(*p)));
    loss = loss < 0 ? term : tape.add(loss, term);
  }
  tape.backward(loss);
  opt.step(cx, tape, lr);
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / (stem + std::to_string(::getpid()) + ".vcpk"))
      .string();
}

}  // namespace

TEST_CASE("adam first step matches the hand-computed update") {
  Param w = make_param("w", 1, 1, 1, 0);
  w.value.v[0] = 1.0f;
  AdamConfig cfg;
  Adam opt(cfg, {&w});
  quadratic_step(opt, {&w}, 0.05);
  // g = 2, m-hat = 2, v-hat = 4 -> update = lr * 2 / (2 + eps)
  CHECK(w.value.v[0] == Catch::Approx(1.0 - 0.05 * 2.0 / (2.0 + 1e-8)).margin(1e-7));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Param w = make_param("w", 1, 4, 3, 1);
  Adam opt(AdamConfig{}, {&w});
  for (int i = 0; i < 300; ++i) quadratic_step(opt, {&w}, 0.05);
  for (float v : w.value.v) CHECK(std::fabs(v) < 0.05f);
}

TEST_CASE("adam touches only its own parameters") {
  Param a = make_param("a", 1, 2, 2, 2);
  Param b = make_param("b", 1, 2, 2, 3);
  const auto b_before = b.value.v;
  Adam opt(AdamConfig{}, {&a});  // owns a, not b
  quadratic_step(opt, {&a, &b}, 0.01);
  CHECK(b.value.v == b_before);
  CHECK(a.value.v != std::vector<float>(a.value.v.size(), 0.0f));
}

TEST_CASE("parameters absent from the tape are left alone") {
  Param a = make_param("a", 1, 2, 2, 4);
  Param b = make_param("b", 1, 2, 2, 5);
  const auto b_before = b.value.v;
  Adam opt(AdamConfig{}, {&a, &b});
  quadratic_step(opt, {&a}, 0.01);  // b never enters the tape
  CHECK(b.value.v == b_before);
}

TEST_CASE("learning rate schedule") {
  AdamConfig cfg;
  CHECK(scheduled_lr(cfg, 0) == 0.0002);
  CHECK(scheduled_lr(cfg, 1) == Catch::Approx(0.000199).epsilon(1e-12));
  CHECK(scheduled_lr(cfg, 120) ==
        Catch::Approx(0.0002 * std::pow(0.995, 120.0)).epsilon(1e-12));
  CHECK(scheduled_lr(cfg, 120) == Catch::Approx(0.0001095).epsilon(2e-3));
  for (int e = 1; e <= 120; ++e) {
    // consecutive epochs differ by exactly gamma, by construction
    CHECK(scheduled_lr(cfg, e) == scheduled_lr(cfg, e - 1) * cfg.gamma);
  }
  AdamConfig bad;
  bad.gamma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint round-trips tensors, moments, and metadata") {
  Param a = make_param("enc.w", 2, 3, 4, 10);
  Param b = make_param("enc.b", 1, 3, 1, 11);
  Adam opt(AdamConfig{}, {&a, &b});
  for (int i = 0; i < 3; ++i) quadratic_step(opt, {&a, &b}, 0.01);

  CheckpointMeta meta;
  meta.config_hash = fnv1a64("cfg-v1");
  meta.epoch = 7;
  meta.gen_steps = 3;
  meta.best_val = 0.125;
  meta.config_text = "{\"demo\":true}";
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) rng();
  std::ostringstream ss;
  ss << rng;
  meta.rng_state = ss.str();

  const std::string path = temp_path("ckpt_rt_");
  save_checkpoint(path, meta, {&a, &b});

  const auto av = a.value.v, am = a.adam_m.v, avv = a.adam_v.v, bv = b.value.v;
  for (auto& v : a.value.v) v = -1.0f;
  for (auto& v : a.adam_m.v) v = -1.0f;
  for (auto& v : b.value.v) v = -1.0f;

  CheckpointMeta got = load_checkpoint(path, {&a, &b}, meta.config_hash);
  CHECK(a.value.v == av);
  CHECK(a.adam_m.v == am);
  CHECK(a.adam_v.v == avv);
  CHECK(b.value.v == bv);
  CHECK(got.epoch == 7);
  CHECK(got.gen_steps == 3);
  CHECK(got.best_val == 0.125);
  CHECK(got.config_text == meta.config_text);

  // the stored engine state continues the original stream
  std::mt19937_64 restored;
  std::istringstream in(got.rng_state);
  in >> restored;
  for (int i = 0; i < 10; ++i) CHECK(restored() == rng());

  std::filesystem::remove(path);
}

TEST_CASE("checkpoint refuses a mismatched config hash unless forced") {
  Param a = make_param("w", 1, 2, 2, 20);
  CheckpointMeta meta;
  meta.config_hash = fnv1a64("config-a");
  const std::string path = temp_path("ckpt_hash_");
  save_checkpoint(path, meta, {&a});

  CHECK_THROWS_AS(load_checkpoint(path, {&a}, fnv1a64("config-b")), ContractError);
  CHECK_NOTHROW(load_checkpoint(path, {&a}, fnv1a64("config-b"), /*force=*/true));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects structural mismatches and bad files") {
  Param a = make_param("w", 1, 2, 2, 21);
  CheckpointMeta meta;
  const std::string path = temp_path("ckpt_bad_");
  save_checkpoint(path, meta, {&a});

  Param renamed = make_param("w2", 1, 2, 2, 22);
  CHECK_THROWS_AS(load_checkpoint(path, {&renamed}, meta.config_hash), ContractError);

  Param wrong_shape = make_param("w", 1, 2, 3, 23);
  CHECK_THROWS_AS(load_checkpoint(path, {&wrong_shape}, meta.config_hash), ContractError);

  Param extra = make_param("x", 1, 1, 1, 24);
  CHECK_THROWS_AS(load_checkpoint(path, {&a, &extra}, meta.config_hash), ContractError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.vcpk", {&a}, 0), IoError);

  // truncate: keep the header, drop the tensors
  {
    std::ifstream is(path, std::ios::binary);
    std::string head(40, '\0');
    is.read(head.data(), 40);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(head.data(), 40);
  }
  CHECK_THROWS_AS(load_checkpoint(path, {&a}, meta.config_hash), IoError);
  std::filesystem::remove(path);

  const std::string garbage = temp_path("ckpt_magic_");
  {
    std::ofstream os(garbage, std::ios::binary);
    os << "not a checkpoint";
  }
  CHECK_THROWS_AS(peek_checkpoint(garbage), IoError);
  std::filesystem::remove(garbage);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  Param w = make_param("w", 1, 3, 3, 30);
  Adam opt(AdamConfig{}, {&w});
  quadratic_step(opt, {&w}, 0.02);
  quadratic_step(opt, {&w}, 0.02);

  CheckpointMeta meta;
  meta.config_hash = 1;
  meta.gen_steps = opt.steps();
  const std::string path = temp_path("ckpt_resume_");
  save_checkpoint(path, meta, {&w});

  // uninterrupted: three more steps
  for (int i = 0; i < 3; ++i) quadratic_step(opt, {&w}, 0.02);
  const auto want = w.value.v;

  // resumed: fresh parameter + optimizer, state loaded back
  Param w2 = make_param("w", 1, 3, 3, 31);
  Adam opt2(AdamConfig{}, {&w2});
  CheckpointMeta got = load_checkpoint(path, {&w2}, 1);
  opt2.set_steps(got.gen_steps);
  for (int i = 0; i < 3; ++i) quadratic_step(opt2, {&w2}, 0.02);

  CHECK(w2.value.v == want);
  std::filesystem::remove(path);
}

TEST_CASE("fnv hash is stable and input-sensitive") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 12638187200555641996ull);
  CHECK(fnv1a64("config") != fnv1a64("confih"));
}
