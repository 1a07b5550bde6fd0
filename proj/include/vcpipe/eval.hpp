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

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "vcpipe/convert.hpp"
#include "vcpipe/manifest.hpp"
#include "vcpipe/metrics.hpp"

namespace vcpipe {

/// Transcription client for objective evaluation. Must be a different system
/// from the content encoder — scoring a model with the features it was
/// trained on hides content loss. The utterance hint is a routing key for
/// hermetic mocks; real clients transcribe the audio and ignore it.
class AsrClient {
 public:
  virtual ~AsrClient() = default;
  virtual std::string name() const = 0;
  virtual std::string transcribe(const Waveform& w, const std::string& utt_hint) const = 0;
};

/// Oracle transcriber: answers with the manifest transcript of the hinted
/// utterance. Supports hermetic tests where a perfect recognizer must yield
/// wer = cer = 0.
class MockAsr : public AsrClient {
 public:
  explicit MockAsr(const Manifest& m) {
    for (const auto& e : m.entries) table_[e.id] = e.transcript;
  }

  std::string name() const override { return "mock-oracle"; }

  std::string transcribe(const Waveform&, const std::string& utt_hint) const override {
    auto it = table_.find(utt_hint);
    if (it == table_.end()) throw ContractError("mock asr: unknown utterance '" + utt_hint + "'");
    return it->second;
  }

 private:
  std::map<std::string, std::string> table_;
};

/// External recognizer: "<cmd> <wav-path>" must print the transcript on
/// stdout. The client's name doubles as its identity for the bias guard.
class CommandAsr : public AsrClient {
 public:
  CommandAsr(std::string name, std::string cmd) : name_(std::move(name)), cmd_(std::move(cmd)) {}

  std::string name() const override { return name_; }

  std::string transcribe(const Waveform& w, const std::string&) const override {
    if (cmd_.empty()) throw ConfigError("asr: client '" + name_ + "' has no command configured");
    static int counter = 0;
    auto tmp = std::filesystem::temp_directory_path() /
               ("vcpipe_asr_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
                ".wav");
    save_audio(w, tmp.string());
    FILE* pipe = ::popen((cmd_ + " " + tmp.string()).c_str(), "r");
    if (!pipe) {
      std::filesystem::remove(tmp);
      throw ConfigError("asr: failed to launch client '" + name_ + "': " + cmd_);
    }
    std::string output;
    char chunk[4096];
    size_t got;
    while ((got = ::fread(chunk, 1, sizeof(chunk), pipe)) > 0) output.append(chunk, got);
    int status = ::pclose(pipe);
    std::filesystem::remove(tmp);
    if (status != 0)
      throw ConfigError("asr: client '" + name_ + "' exited with status " +
                        std::to_string(status));
    while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) output.pop_back();
    return output;
  }

 private:
  std::string name_, cmd_;
};

/// Conversion quality over the four gender pairings plus the pooled mean.
/// wer/cer/pcc are means over the pairs where the metric is defined; the
/// *_defined counters say how many that was.
struct EvalReport {
  struct Row {
    int pairs = 0;
    int wer_defined = 0;
    int cer_defined = 0;
    int pcc_defined = 0;
    double wer = 0.0;
    double cer = 0.0;
    double pcc = 0.0;
  };

  static constexpr std::array<const char*, 4> kCategories = {"F2F", "F2M", "M2M", "M2F"};
  std::array<Row, 4> rows;
  Row mean;

  std::string format() const {
    std::ostringstream os;
    os << "category\tpairs\twer\tcer\tpcc\tpcc_defined\n";
    auto line = [&os](const char* name, const Row& r) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s\t%d\t%.4f\t%.4f\t%.4f\t%d\n", name, r.pairs,
                    r.wer_defined ? r.wer : 0.0, r.cer_defined ? r.cer : 0.0,
                    r.pcc_defined ? r.pcc : 0.0, r.pcc_defined);
      os << buf;
    };
    for (size_t i = 0; i < kCategories.size(); ++i) line(kCategories[i], rows[i]);
    line("mean", mean);
    return os.str();
  }
};

struct EvalConfig {
  int pairs_per_category = 25;
  uint64_t seed = 0;
  F0Config f0ex;
  bool pcc_log_hz = false;
};

namespace detail {

struct EvalAccum {
  double wer_sum = 0, cer_sum = 0, pcc_sum = 0;
  int pairs = 0, wer_n = 0, cer_n = 0, pcc_n = 0;

  void add(std::optional<double> w, std::optional<double> c, std::optional<double> p) {
    ++pairs;
    if (w) {
      wer_sum += *w;
      ++wer_n;
    }
    if (c) {
      cer_sum += *c;
      ++cer_n;
    }
    if (p) {
      pcc_sum += *p;
      ++pcc_n;
    }
  }

  EvalReport::Row row() const {
    EvalReport::Row r;
    r.pairs = pairs;
    r.wer_defined = wer_n;
    r.cer_defined = cer_n;
    r.pcc_defined = pcc_n;
    if (wer_n) r.wer = wer_sum / wer_n;
    if (cer_n) r.cer = cer_sum / cer_n;
    if (pcc_n) r.pcc = pcc_sum / pcc_n;
    return r;
  }
};

}  // namespace detail

/// Converts sampled (source, reference) pairs across all four gender
/// pairings, transcribes the conversions, and scores them against the source
/// transcripts. Speakers without gender metadata are left out of the
/// sampling. Deterministic in the seed.
inline EvalReport evaluate(const Manifest& manifest, const std::map<std::string, char>& gender,
                           VcModel& model, const LinguisticEncoder& enc, const AsrClient& asr,
                           const EvalConfig& cfg) {
  if (asr.name() == enc.name())
    throw ConfigError("eval: ASR client '" + asr.name() +
                      "' is the content encoder; use an independent recognizer");
  if (cfg.pairs_per_category < 1)
    throw ConfigError("eval: pairs_per_category must be >= 1");
  manifest.validate();

  // evaluation draws from the held-out split only
  std::vector<const ManifestEntry*> test;
  for (const auto& e : manifest.entries)
    if (e.split == "test") test.push_back(&e);
  if (test.empty()) throw ContractError("eval: manifest has no test split");

  auto gender_of = [&gender](const std::string& spk) {
    auto it = gender.find(spk);
    return it == gender.end() ? 'U' : it->second;
  };
  std::vector<const ManifestEntry*> by_gender[2];  // 0 = F, 1 = M
  for (const auto* e : test) {
    const char g = gender_of(e->speaker);
    if (g == 'F') by_gender[0].push_back(e);
    if (g == 'M') by_gender[1].push_back(e);
  }

  // category i: source gender kSrc[i] to reference gender kRef[i]
  static constexpr int kSrc[4] = {0, 0, 1, 1};
  static constexpr int kRef[4] = {0, 1, 1, 0};
  std::mt19937_64 rng(cfg.seed);
  std::map<std::string, Waveform> cache;
  auto load = [&cache](const std::string& path) -> const Waveform& {
    auto it = cache.find(path);
    if (it == cache.end()) it = cache.emplace(path, load_audio(path, 24000)).first;
    return it->second;
  };

  EvalReport report;
  detail::EvalAccum pooled;
  for (int cat = 0; cat < 4; ++cat) {
    detail::EvalAccum acc;
    const auto& sources = by_gender[kSrc[cat]];
    const auto& refs = by_gender[kRef[cat]];
    for (int k = 0; k < cfg.pairs_per_category; ++k) {
      if (sources.empty()) break;
      std::uniform_int_distribution<size_t> pick_s(0, sources.size() - 1);
      const ManifestEntry* src = sources[pick_s(rng)];
      std::vector<const ManifestEntry*> cands;
      for (const auto* e : refs)
        if (e->speaker != src->speaker) cands.push_back(e);
      if (cands.empty()) break;
      std::uniform_int_distribution<size_t> pick_r(0, cands.size() - 1);
      const ManifestEntry* ref = cands[pick_r(rng)];

      const Waveform& source = load(src->path);
      Waveform converted = convert(source, load(ref->path), model, enc, cfg.f0ex);
      const std::string hyp = asr.transcribe(converted, src->id);
      acc.add(wer(src->transcript, hyp), cer(src->transcript, hyp),
              pcc(source, converted, cfg.f0ex, cfg.pcc_log_hz));
    }
    report.rows[cat] = acc.row();
    pooled.wer_sum += acc.wer_sum;
    pooled.cer_sum += acc.cer_sum;
    pooled.pcc_sum += acc.pcc_sum;
    pooled.pairs += acc.pairs;
    pooled.wer_n += acc.wer_n;
    pooled.cer_n += acc.cer_n;
    pooled.pcc_n += acc.pcc_n;
  }
  report.mean = pooled.row();
  return report;
}

}  // namespace vcpipe
