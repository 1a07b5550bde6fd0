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

// Command-line front end: dataset preparation, training, conversion,
// objective evaluation, and a pitch-track dump for debugging.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vcpipe/convert.hpp"
#include "vcpipe/eval.hpp"
#include "vcpipe/manifest.hpp"
#include "vcpipe/runconfig.hpp"
#include "vcpipe/trainer.hpp"

namespace fs = std::filesystem;
using namespace vcpipe;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  // transcripts travel in a TSV column: fold line breaks and tabs to spaces
  for (char& c : text)
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  const auto a = text.find_first_not_of(' ');
  if (a == std::string::npos) return "";
  const auto b = text.find_last_not_of(' ');
  std::string out = text.substr(a, b - a + 1);
  std::string collapsed;
  for (char c : out)
    if (c != ' ' || collapsed.empty() || collapsed.back() != ' ') collapsed.push_back(c);
  return collapsed;
}

// Speaker id for a scanned wav: the parent directory when the corpus nests
// one directory per speaker (VCTK layout), otherwise the stem up to the
// first underscore ("p225_001" -> "p225").
std::string speaker_of(const fs::path& wav, const fs::path& root) {
  if (wav.parent_path() != root) return wav.parent_path().filename().string();
  const std::string stem = wav.stem().string();
  const auto us = stem.find('_');
  return us == std::string::npos ? stem : stem.substr(0, us);
}

std::string find_transcript(const fs::path& wav, const std::string& speaker,
                            const std::string& transcripts_dir) {
  const std::string stem = wav.stem().string();
  std::vector<fs::path> candidates;
  if (!transcripts_dir.empty()) {
    candidates.emplace_back(fs::path(transcripts_dir) / speaker / (stem + ".txt"));
    candidates.emplace_back(fs::path(transcripts_dir) / (stem + ".txt"));
  }
  candidates.emplace_back(wav.parent_path() / (stem + ".txt"));
  for (const auto& c : candidates)
    if (fs::exists(c)) return read_text_file(c.string());
  return "";
}

int cmd_prepare(const std::string& dataset, const std::string& out_path,
                const std::string& speaker_info, const std::string& transcripts_dir, int holdout,
                unsigned long long seed) {
  if (!fs::is_directory(dataset)) throw IoError("dataset directory '" + dataset + "' not found");
  Manifest m;
  const fs::path root(dataset);
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    ManifestEntry ent;
    ent.id = e.path().stem().string();
    ent.speaker = speaker_of(e.path(), root);
    ent.path = fs::absolute(e.path()).string();
    ent.transcript = find_transcript(e.path(), ent.speaker, transcripts_dir);
    m.entries.push_back(std::move(ent));
  }
  if (m.entries.empty()) throw EmptyInputError("no .wav files under '" + dataset + "'");
  // directory iteration order is unspecified; sort so reruns agree byte-for-byte
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });

  std::map<std::string, char> gender;
  if (!speaker_info.empty()) gender = read_speaker_info(speaker_info);

  if (holdout > 0) {
    m = make_split(m, gender, holdout, seed);
  } else {
    for (auto& ent : m.entries) ent.split = "train";
    m.validate();
  }
  write_manifest(out_path, m);
  std::printf("prepare: %zu utterances, %zu speakers (%zu train / %zu test) -> %s\n",
              m.entries.size(), m.speakers().size(), m.speakers("train").size(),
              m.speakers("test").size(), out_path.c_str());
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& ckpt_dir, const std::string& resume_path,
              const std::string& log_path, bool force) {
  RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  rc.validate();
  const std::string text = config_text(rc);
  auto enc = make_content_encoder(rc.content_encoder);

  Manifest m = read_manifest(manifest_path);
  m.validate();
  std::vector<TrainItem> items;
  for (const auto& e : m.entries) {
    if (e.split == "test") continue;  // held out for any-to-any evaluation
    try {
      TrainItem it = prepare_item(load_audio(e.path, kContentRate), *enc, rc.f0ex,
                                  rc.model.spk_mel, e.id);
      if (it.content.frames < rc.train.segment_frames) {
        std::fprintf(stderr, "warn: '%s' too short for a %d-frame segment, skipped\n",
                     e.id.c_str(), rc.train.segment_frames);
        continue;
      }
      items.push_back(std::move(it));
    } catch (const Error& err) {
      std::fprintf(stderr, "warn: skipping '%s': %s\n", e.id.c_str(), err.what());
    }
  }
  if (items.empty()) throw EmptyInputError("no trainable utterances in '" + manifest_path + "'");

  fs::create_directories(ckpt_dir);
  auto log = log_path.empty() ? nullptr : std::make_shared<std::ofstream>(log_path, std::ios::app);
  if (log && !*log) throw IoError("cannot open log file '" + log_path + "'");
  Trainer::LogSink sink = [log](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (log) *log << line << '\n' << std::flush;
  };

  VcModel model(rc.model, rc.train.seed);
  Trainer trainer(model, rc.train, ckpt_dir, text, sink);
  if (!resume_path.empty()) {
    CheckpointMeta meta = load_checkpoint(resume_path, model.all_params(), config_hash(rc), force);
    trainer.restore(meta);
    std::printf("resumed '%s' at epoch %d (%lld predictor steps)\n", resume_path.c_str(),
                meta.epoch, meta.gen_steps);
  }
  std::printf("training %zu utterances, encoder %s, config %016llx\n", items.size(),
              enc->name().c_str(), static_cast<unsigned long long>(config_hash(rc)));
  trainer.run(items, {});
  std::printf("done: checkpoints in %s\n", ckpt_dir.c_str());
  return 0;
}

int cmd_convert(const std::string& source, const std::string& reference,
                const std::string& checkpoint, const std::string& out_path, bool force) {
  LoadedPipeline lp = load_pipeline(checkpoint, force);
  Waveform src = load_audio(source, kContentRate);
  Waveform ref = load_audio(reference, kContentRate);
  Waveform out = convert(src, ref, lp.model, *lp.enc, lp.rc.f0ex);
  save_audio(out, out_path);
  std::printf("convert: %zu samples -> %zu samples, %s\n", src.samples.size(),
              out.samples.size(), out_path.c_str());
  return 0;
}

std::unique_ptr<AsrClient> make_asr(const std::string& id, const Manifest& m) {
  if (id == "mock") return std::make_unique<MockAsr>(m);
  const std::string prefix = "cmd:";
  if (id.rfind(prefix, 0) == 0) {
    const std::string rest = id.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= rest.size())
      throw ConfigError("asr client 'cmd:' needs <name>:<command>, got '" + id + "'");
    return std::make_unique<CommandAsr>(rest.substr(0, colon), rest.substr(colon + 1));
  }
  throw ConfigError("unknown asr client '" + id + "' (use 'mock' or 'cmd:<name>:<command>')");
}

int cmd_eval(const std::string& manifest_path, const std::string& checkpoint,
             const std::string& asr_id, const std::string& speaker_info,
             const std::string& out_path, int pairs, unsigned long long seed, bool log_hz,
             bool force) {
  Manifest m = read_manifest(manifest_path);
  m.validate();
  const auto gender = read_speaker_info(speaker_info);
  LoadedPipeline lp = load_pipeline(checkpoint, force);
  auto asr = make_asr(asr_id, m);

  EvalConfig ecfg;
  ecfg.pairs_per_category = pairs > 0 ? pairs : lp.rc.eval_pairs_per_category;
  ecfg.seed = seed;
  ecfg.f0ex = lp.rc.f0ex;
  ecfg.pcc_log_hz = log_hz;
  EvalReport rep = evaluate(m, gender, lp.model, *lp.enc, *asr, ecfg);

  const std::string text = rep.format();
  std::printf("%s", text.c_str());
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open report file '" + out_path + "'");
    out << text;
    std::printf("report written to %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_f0(const std::string& in_path, const std::string& out_path, const F0Config& fcfg) {
  Waveform w = load_audio(in_path, kContentRate);
  F0Track track = extract_f0(w, fcfg);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open '" + out_path + "'");
  out << "frame\tf0_hz\tvoiced\n";
  char line[64];
  for (size_t i = 0; i < track.frames(); ++i) {
    std::snprintf(line, sizeof(line), "%zu\t%.3f\t%d\n", i, track.f0_hz[i],
                  track.voiced[i] ? 1 : 0);
    out << line;
  }
  std::printf("f0: %zu frames -> %s\n", track.frames(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"any-to-any voice conversion pipeline"};
  app.require_subcommand(1);

  // prepare
  std::string ds_dir, ds_out, ds_spkinfo, ds_txt;
  int ds_holdout = 6;
  unsigned long long ds_seed = 0;
  auto* prepare = app.add_subcommand("prepare", "scan a corpus into a manifest and split it");
  prepare->add_option("--dataset", ds_dir, "corpus root, scanned recursively for .wav")
      ->required();
  prepare->add_option("--out", ds_out, "manifest TSV to write")->required();
  prepare->add_option("--speaker-info", ds_spkinfo, "speaker metadata table (id, age, gender)");
  prepare->add_option("--transcripts", ds_txt, "transcript root (<speaker>/<id>.txt)");
  prepare->add_option("--holdout", ds_holdout, "speakers held out for evaluation (0 = none)");
  prepare->add_option("--seed", ds_seed, "split draw seed");

  // train
  std::string tr_manifest, tr_config, tr_ckpt, tr_resume, tr_log;
  bool tr_force = false;
  auto* train = app.add_subcommand("train", "train on a manifest's train split");
  train->add_option("--manifest", tr_manifest, "manifest TSV")->required();
  train->add_option("--config", tr_config, "run-config JSON (defaults when omitted)");
  train->add_option("--ckpt-dir", tr_ckpt, "checkpoint directory")->required();
  train->add_option("--resume", tr_resume, "checkpoint to continue from");
  train->add_option("--log", tr_log, "also append step lines to this file");
  train->add_flag("--force", tr_force, "resume past a config-hash mismatch");

  // convert
  std::string cv_src, cv_ref, cv_ckpt, cv_out;
  bool cv_force = false;
  auto* conv = app.add_subcommand("convert", "speak the source content in the reference voice");
  conv->add_option("--source", cv_src, "source utterance (content and prosody)")->required();
  conv->add_option("--reference", cv_ref, "reference utterance (target voice)")->required();
  conv->add_option("--checkpoint", cv_ckpt, "trained checkpoint")->required();
  conv->add_option("--out", cv_out, "output wav")->required();
  conv->add_flag("--force", cv_force, "load past a config-hash mismatch");

  // eval
  std::string ev_manifest, ev_ckpt, ev_asr, ev_spkinfo, ev_out;
  int ev_pairs = 0;
  unsigned long long ev_seed = 0;
  bool ev_loghz = false, ev_force = false;
  auto* eval = app.add_subcommand("eval", "objective metrics over the test split");
  eval->add_option("--manifest", ev_manifest, "manifest TSV with a test split")->required();
  eval->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();
  eval->add_option("--asr", ev_asr, "'mock' or 'cmd:<name>:<command>'")->required();
  eval->add_option("--speaker-info", ev_spkinfo, "speaker metadata table for gender pairing")
      ->required();
  eval->add_option("--out", ev_out, "write the report here as well as stdout");
  eval->add_option("--pairs", ev_pairs, "pairs per category (default from run config)");
  eval->add_option("--seed", ev_seed, "pair-sampling seed");
  eval->add_flag("--log-hz", ev_loghz, "correlate log-Hz pitch instead of linear");
  eval->add_flag("--force", ev_force, "load past a config-hash mismatch");

  // f0
  std::string f0_in, f0_out;
  F0Config fcfg;
  auto* f0 = app.add_subcommand("f0", "dump a pitch track as TSV");
  f0->add_option("--in", f0_in, "input wav")->required();
  f0->add_option("--out", f0_out, "TSV to write (frame, f0_hz, voiced)")->required();
  f0->add_option("--fmin", fcfg.fmin, "lowest admissible pitch, Hz");
  f0->add_option("--fmax", fcfg.fmax, "highest admissible pitch, Hz");
  f0->add_option("--threshold", fcfg.voicing_threshold, "voicing decision threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed())
      return cmd_prepare(ds_dir, ds_out, ds_spkinfo, ds_txt, ds_holdout, ds_seed);
    if (train->parsed())
      return cmd_train(tr_manifest, tr_config, tr_ckpt, tr_resume, tr_log, tr_force);
    if (conv->parsed()) return cmd_convert(cv_src, cv_ref, cv_ckpt, cv_out, cv_force);
    if (eval->parsed())
      return cmd_eval(ev_manifest, ev_ckpt, ev_asr, ev_spkinfo, ev_out, ev_pairs, ev_seed,
                      ev_loghz, ev_force);
    if (f0->parsed()) return cmd_f0(f0_in, f0_out, fcfg);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
