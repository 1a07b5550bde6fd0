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
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "vcpipe/convert.hpp"
#include "vcpipe/eval.hpp"
#include "vcpipe/manifest.hpp"
#include "vcpipe/runconfig.hpp"

using namespace vcpipe;

namespace {

Waveform make_voice(int samples, double f0, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.01);
  Waveform w;
  w.sample_rate = 24000;
  w.samples.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = i / 24000.0;
    const double inst = f0 * (1.0 + 0.01 * std::sin(2.0 * M_PI * 4.0 * t));
    double v = 0.0;
    for (int h = 1; h <= 4; ++h) v += std::sin(2.0 * M_PI * inst * h * t + 0.3 * h) / (h * h);
    w.samples[i] = static_cast<float>(0.3 * v + g(rng));
  }
  return w;
}

RunConfig tiny_run_config() {
  RunConfig rc;
  rc.model.content_dim = 8;
  rc.model.f0.hidden1 = 8;
  rc.model.f0.hidden2 = 8;
  rc.model.f0.out_channels = 4;
  rc.model.spk.hidden = 16;
  rc.model.spk.dim = 8;
  rc.model.spk.blocks = 2;
  rc.model.spk.min_reference_seconds = 0.25;
  rc.model.gen.in_channels = 12;
  rc.model.gen.cond_dim = 8;
  rc.model.gen.base_channels = 32;
  rc.model.gen.dilations = {1, 3};
  rc.model.disc.periods = {2, 3};
  rc.model.disc.mpd_channels = {4, 8};
  rc.model.disc.msd_scales = 2;
  rc.model.disc.msd_channels = {4, 8};
  rc.model.disc.msd_kernels = {15, 5};
  rc.model.rec_mel.n_fft = 512;
  rc.model.rec_mel.win = 512;
  rc.model.rec_mel.n_mels = 32;
  rc.train.epochs = 1;
  rc.train.batch_size = 2;
  rc.train.seed = 3;
  rc.content_encoder = "toy:5:8";
  rc.eval_pairs_per_category = 2;
  return rc;
}

std::string temp_dir(const std::string& stem) {
  auto p = std::filesystem::temp_directory_path() / (stem + std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p.string();
}

Manifest demo_manifest() {
  Manifest m;
  m.entries = {{"u1", "spk1", "/x/u1.wav", "the first line", "train"},
               {"u2", "spk1", "/x/u2.wav", "another line", "train"},
               {"u3", "spk2", "/x/u3.wav", "held out words", "test"}};
  return m;
}

}  // namespace

TEST_CASE("manifest io and validation") {
  const std::string dir = temp_dir("vcpipe_manifest_");
  const std::string path = dir + "/m.tsv";

  SECTION("tab-separated roundtrip") {
    Manifest m = demo_manifest();
    write_manifest(path, m);
    Manifest r = read_manifest(path);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[1].id == "u2");
    CHECK(r.entries[1].speaker == "spk1");
    CHECK(r.entries[1].transcript == "another line");
    CHECK(r.entries[2].split == "test");
    CHECK(r.speakers("test") == std::set<std::string>{"spk2"});
  }
  SECTION("rows without a split tag read back as unsplit") {
    std::ofstream out(path);
    out << "u9\tspkA\t/x/u9.wav\tsome words\n";
    out.close();
    Manifest r = read_manifest(path);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].split.empty());
  }
  SECTION("structural violations are rejected") {
    Manifest dup = demo_manifest();
    dup.entries[1].id = "u1";
    CHECK_THROWS_AS(dup.validate(), ContractError);

    Manifest bad_tag = demo_manifest();
    bad_tag.entries[0].split = "dev";
    CHECK_THROWS_AS(bad_tag.validate(), ContractError);

    Manifest straddle = demo_manifest();
    straddle.entries[2].speaker = "spk1";  // spk1 now in both splits
    CHECK_THROWS_AS(straddle.validate(), ContractError);

    CHECK_THROWS_AS(read_manifest(dir + "/absent.tsv"), IoError);

    std::ofstream out(path);
    out << "only\tthree\tcols\n";
    out.close();
    CHECK_THROWS_AS(read_manifest(path), IoError);
  }
}

TEST_CASE("speaker info table tolerates extra columns and comments") {
  const std::string dir = temp_dir("vcpipe_spkinfo_");
  const std::string path = dir + "/speaker-info.txt";
  std::ofstream out(path);
  out << "ID AGE GENDER ACCENTS REGION\n"
      << "p225 23 F English Southern\n"
      << "p226 22 M\n"
      << "# p227 is withheld\n"
      << "p228 30\n";
  out.close();
  auto info = read_speaker_info(path);
  CHECK(info.at("p225") == 'F');
  CHECK(info.at("p226") == 'M');
  CHECK(info.at("p228") == 'U');
  CHECK(info.count("ID") == 0);
  CHECK(info.count("#") == 0);
  CHECK_THROWS_AS(read_speaker_info(dir + "/absent.txt"), IoError);
}

TEST_CASE("speaker split is whole, balanced, and seed-deterministic") {
  // 110 speakers, half F half M, two utterances each
  Manifest m;
  std::map<std::string, char> gender;
  for (int i = 0; i < 110; ++i) {
    const std::string spk = "p" + std::to_string(100 + i);
    gender[spk] = i % 2 == 0 ? 'F' : 'M';
    for (int u = 0; u < 2; ++u)
      m.entries.push_back({spk + "_u" + std::to_string(u), spk, "/x/" + spk + ".wav", "text", ""});
  }

  Manifest split = make_split(m, gender, 6, /*seed=*/5);
  split.validate();
  const auto test_spk = split.speakers("test");
  const auto train_spk = split.speakers("train");
  CHECK(test_spk.size() == 6);
  CHECK(train_spk.size() == 104);

  SECTION("speakers move wholly and splits stay disjoint") {
    for (const auto& s : test_spk) CHECK(train_spk.count(s) == 0);
    std::map<std::string, std::set<std::string>> tags;
    for (const auto& e : split.entries) tags[e.speaker].insert(e.split);
    for (const auto& [spk, t] : tags) CHECK(t.size() == 1);
  }
  SECTION("holdout balances gender three and three") {
    int f = 0, mcount = 0;
    for (const auto& s : test_spk) (gender.at(s) == 'F' ? f : mcount)++;
    CHECK(f == 3);
    CHECK(mcount == 3);
  }
  SECTION("same seed reproduces, another seed moves the holdout") {
    Manifest again = make_split(m, gender, 6, 5);
    CHECK(again.speakers("test") == test_spk);

    Manifest other = make_split(m, gender, 6, 6);
    CHECK(other.speakers("test") != test_spk);
  }
  SECTION("entry order does not steer the draw") {
    Manifest shuffled = m;
    std::mt19937_64 rng(99);
    std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), rng);
    Manifest s2 = make_split(shuffled, gender, 6, 5);
    CHECK(s2.speakers("test") == test_spk);
  }
  SECTION("unknown-gender speakers fill only after both pools empty") {
    Manifest small;
    std::map<std::string, char> g2;
    for (int i = 0; i < 8; ++i) {
      const std::string spk = "s" + std::to_string(i);
      g2[spk] = i < 3 ? 'F' : i < 6 ? 'M' : 'U';
      small.entries.push_back({spk + "_u0", spk, "/x.wav", "t", ""});
    }
    Manifest s = make_split(small, g2, 4, 1);
    for (const auto& spk : s.speakers("test")) CHECK(g2.at(spk) != 'U');
  }
  SECTION("too few speakers is a contract error") {
    Manifest tiny;
    std::map<std::string, char> g3;
    for (int i = 0; i < 7; ++i) {
      const std::string spk = "q" + std::to_string(i);
      g3[spk] = 'F';
      tiny.entries.push_back({spk + "_u0", spk, "/x.wav", "t", ""});
    }
    CHECK_THROWS_AS(make_split(tiny, g3, 6, 0), ContractError);
  }
}

TEST_CASE("run config defaults carry the published recipe") {
  RunConfig rc;
  rc.validate();
  CHECK(rc.train.adam.lr0 == 0.0002);
  CHECK(rc.train.adam.gamma == 0.995);
  CHECK(rc.train.epochs == 120);
  CHECK(rc.train.weights.lambda_rec == 45.0);
  CHECK(rc.train.weights.lambda_advp == 1.0);
  CHECK(rc.train.weights.lambda_fm == 1.0);
  CHECK(rc.train.weights.lambda_spk == 0.01);
  CHECK(rc.model.gen.upsample == std::vector<int>{10, 8, 4, 3});
  CHECK(rc.model.gen.hop() == 960);
  CHECK(rc.model.disc.periods == std::vector<int>{2, 3, 5, 7, 11});
  CHECK(rc.model.rec_mel.log_floor == 1e-10);
  CHECK(rc.model.spk_mel.log_floor == 1e-5);
  CHECK(rc.eval_pairs_per_category == 25);
}

TEST_CASE("run config text is canonical and hash-stable") {
  RunConfig rc = tiny_run_config();
  const std::string text = config_text(rc);
  RunConfig back = parse_run_config(text);
  CHECK(config_text(back) == text);
  CHECK(config_hash(back) == config_hash(rc));

  SECTION("any field change moves the hash") {
    RunConfig other = rc;
    other.train.epochs = 2;
    CHECK(config_hash(other) != config_hash(rc));
  }
  SECTION("a partial file overlays the defaults") {
    RunConfig rc2 = parse_run_config(R"({"train": {"epochs": 3, "seed": 9}})");
    CHECK(rc2.train.epochs == 3);
    CHECK(rc2.train.seed == 9);
    CHECK(rc2.train.adam.lr0 == 0.0002);
    CHECK(rc2.model.gen.base_channels == 512);

    RunConfig rc3 = parse_run_config(R"({"model": {"rec_mel": {"n_mels": 32}}})");
    CHECK(rc3.model.rec_mel.n_mels == 32);
    CHECK(rc3.model.rec_mel.n_fft == 1024);  // untouched sibling keeps its default
  }
  SECTION("malformed input is a config error") {
    CHECK_THROWS_AS(parse_run_config("{nope"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"f0_extract": {"method": "psychic"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"train": {"epochs": 0}})"), ConfigError);
  }
  SECTION("file loading surfaces io errors") {
    CHECK_THROWS_AS(load_run_config("/nonexistent/rc.json"), IoError);
    const std::string dir = temp_dir("vcpipe_rc_");
    std::ofstream(dir + "/rc.json") << text;
    CHECK(config_hash(load_run_config(dir + "/rc.json")) == config_hash(rc));
  }
}

TEST_CASE("content encoder factory parses both adapter kinds") {
  auto toy = make_content_encoder("toy:5:8");
  CHECK(toy->name() == "toy-mel-proj-5");
  CHECK(toy->dim() == 8);

  auto cmd = make_content_encoder("command:conformer-xl:4:/usr/bin/env extractor");
  CHECK(cmd->name() == "conformer-xl");
  CHECK(cmd->dim() == 4);

  CHECK_THROWS_AS(make_content_encoder("toy:5"), ConfigError);
  CHECK_THROWS_AS(make_content_encoder("toy:abc:8"), ConfigError);
  CHECK_THROWS_AS(make_content_encoder("command:name:8"), ConfigError);
  CHECK_THROWS_AS(make_content_encoder("command:name:x:/bin/cat"), ConfigError);
  CHECK_THROWS_AS(make_content_encoder("psychic:1:2"), ConfigError);
}

TEST_CASE("conversion keeps duration, is deterministic, and hears the reference") {
  RunConfig rc = tiny_run_config();
  VcModel model(rc.model, 3);
  ToyEncoder enc(5, 8);
  // a source that is not a whole number of frames
  Waveform src = make_voice(19999, 150.0, 100);
  Waveform ref_a = make_voice(14400, 210.0, 101);
  Waveform ref_b = make_voice(14400, 120.0, 102);

  Waveform out = convert(src, ref_a, model, enc);
  CHECK(out.sample_rate == 24000);
  CHECK(out.samples.size() == 20u * 960u);  // 19999 samples -> 20 whole frames
  CHECK(std::llabs(static_cast<long long>(out.samples.size()) -
                   static_cast<long long>(src.samples.size())) < 960);

  SECTION("bit determinism") {
    Waveform again = convert(src, ref_a, model, enc);
    CHECK(again.samples == out.samples);
  }
  SECTION("swapping the reference changes the waveform") {
    Waveform other = convert(src, ref_b, model, enc);
    REQUIRE(other.samples.size() == out.samples.size());
    float linf = 0.0f;
    for (size_t i = 0; i < out.samples.size(); ++i)
      linf = std::max(linf, std::abs(out.samples[i] - other.samples[i]));
    CHECK(linf > 0.0f);
  }
  SECTION("contract violations") {
    ToyEncoder wide(5, 16);
    CHECK_THROWS_AS(convert(src, ref_a, model, wide), ConfigError);

    Waveform w16 = src;
    w16.sample_rate = 16000;
    CHECK_THROWS_AS(convert(w16, ref_a, model, enc), ContractError);
  }
}

TEST_CASE("a checkpoint rehydrates into the same pipeline") {
  const std::string dir = temp_dir("vcpipe_pipe_");
  const std::string path = dir + "/model.vcpk";
  RunConfig rc = tiny_run_config();
  VcModel model(rc.model, 3);

  CheckpointMeta meta;
  meta.epoch = 4;
  meta.config_text = config_text(rc);
  meta.config_hash = config_hash(rc);
  save_checkpoint(path, meta, model.all_params());

  LoadedPipeline lp = load_pipeline(path);
  CHECK(lp.meta.epoch == 4);
  CHECK(lp.rc.train.seed == rc.train.seed);
  CHECK(lp.enc->dim() == 8);

  Waveform src = make_voice(12000, 160.0, 50);
  Waveform ref = make_voice(9600, 220.0, 51);
  Waveform direct = convert(src, ref, model, *make_content_encoder(rc.content_encoder));
  Waveform through = convert(src, ref, lp.model, *lp.enc);
  CHECK(direct.samples == through.samples);

  SECTION("a stale hash is refused unless forced") {
    RunConfig altered = rc;
    altered.train.epochs = 7;  // same architecture, different recipe
    CheckpointMeta stale = meta;
    stale.config_text = config_text(altered);  // hash now disagrees with text
    save_checkpoint(path, stale, model.all_params());
    CHECK_THROWS_AS(load_pipeline(path), ContractError);
    LoadedPipeline forced = load_pipeline(path, /*force=*/true);
    CHECK(forced.rc.train.epochs == 7);
  }
}

TEST_CASE("hermetic evaluation with an oracle recognizer") {
  const std::string dir = temp_dir("vcpipe_eval_");
  RunConfig rc = tiny_run_config();
  VcModel model(rc.model, 3);
  ToyEncoder enc(5, 8);

  Manifest m;
  std::map<std::string, char> gender = {
      {"s1", 'F'}, {"s2", 'F'}, {"s3", 'M'}, {"s4", 'M'}};
  const char* lines[] = {"the birch canoe slid", "glue the sheet to the dark blue background"};
  int idx = 0;
  for (const auto& [spk, g] : gender) {
    const double f0 = g == 'F' ? 200.0 + 10 * idx : 120.0 + 10 * idx;
    for (int u = 0; u < 2; ++u) {
      const std::string id = spk + "_u" + std::to_string(u);
      const std::string path = dir + "/" + id + ".wav";
      save_audio(make_voice(16800, f0 + 5 * u, 400 + idx * 2 + u), path);
      m.entries.push_back({id, spk, path, lines[u], "test"});
    }
    ++idx;
  }

  MockAsr mock(m);
  EvalConfig ecfg;
  ecfg.pairs_per_category = 2;
  ecfg.seed = 11;

  EvalReport rep = evaluate(m, gender, model, enc, mock, ecfg);
  for (int cat = 0; cat < 4; ++cat) {
    INFO("category " << EvalReport::kCategories[cat]);
    CHECK(rep.rows[cat].pairs == 2);
    CHECK(rep.rows[cat].wer_defined == 2);
    CHECK(rep.rows[cat].wer == 0.0);
    CHECK(rep.rows[cat].cer == 0.0);
    CHECK(rep.rows[cat].pcc_defined <= rep.rows[cat].pairs);
  }
  CHECK(rep.mean.pairs == 8);
  CHECK(rep.mean.wer == 0.0);

  const std::string text = rep.format();
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);  // header + 4 rows + mean
  CHECK(text.find("F2M") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);

  SECTION("the report is seed-deterministic") {
    EvalReport rep2 = evaluate(m, gender, model, enc, mock, ecfg);
    CHECK(rep2.format() == text);
  }
  SECTION("the recognizer may not be the content encoder") {
    struct BiasedAsr : AsrClient {
      std::string id;
      std::string name() const override { return id; }
      std::string transcribe(const Waveform&, const std::string&) const override { return ""; }
    };
    BiasedAsr biased;
    biased.id = enc.name();
    CHECK_THROWS_AS(evaluate(m, gender, model, enc, biased, ecfg), ConfigError);
  }
  SECTION("a manifest without a test split cannot be evaluated") {
    Manifest train_only = m;
    for (auto& e : train_only.entries) e.split = "train";
    CHECK_THROWS_AS(evaluate(train_only, gender, model, enc, mock, ecfg), ContractError);
  }
}
