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

#include <fstream>
#include <string>

#include "json.hpp"
#include "vcpipe/checkpoint.hpp"
#include "vcpipe/f0.hpp"
#include "vcpipe/model.hpp"
#include "vcpipe/trainer.hpp"

namespace vcpipe {

/// One declarative file for a whole run: mel front-ends, every module's
/// dimensions, loss weights, optimizer and loop settings, the pitch
/// extractor, the content adapter, and evaluation knobs. The C++ defaults
/// are the published recipe; a config file only states deviations.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  F0Config f0ex;
  // "toy:<seed>:<dim>" builds the hermetic mel-projection adapter;
  // "command:<path>" shells out to an external linguistic encoder.
  std::string content_encoder = "toy:17:256";
  int eval_pairs_per_category = 25;

  void validate() const {
    model.validate();
    train.validate();
    if (content_encoder.empty()) throw ConfigError("run config: content_encoder is required");
    if (eval_pairs_per_category < 1)
      throw ConfigError("run config: eval_pairs_per_category must be >= 1");
  }
};

namespace detail {

inline nlohmann::json mel_to_json(const MelConfig& m) {
  return {{"sample_rate", m.sample_rate}, {"n_fft", m.n_fft},   {"hop", m.hop},
          {"win", m.win},                 {"n_mels", m.n_mels}, {"fmin", m.fmin},
          {"fmax", m.fmax},               {"log_floor", m.log_floor}};
}

inline void mel_from_json(const nlohmann::json& j, MelConfig* m) {
  if (j.contains("sample_rate")) j.at("sample_rate").get_to(m->sample_rate);
  if (j.contains("n_fft")) j.at("n_fft").get_to(m->n_fft);
  if (j.contains("hop")) j.at("hop").get_to(m->hop);
  if (j.contains("win")) j.at("win").get_to(m->win);
  if (j.contains("n_mels")) j.at("n_mels").get_to(m->n_mels);
  if (j.contains("fmin")) j.at("fmin").get_to(m->fmin);
  if (j.contains("fmax")) j.at("fmax").get_to(m->fmax);
  if (j.contains("log_floor")) j.at("log_floor").get_to(m->log_floor);
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["model"] = {
      {"content_dim", rc.model.content_dim},
      {"f0",
       {{"hidden1", rc.model.f0.hidden1},
        {"hidden2", rc.model.f0.hidden2},
        {"out_channels", rc.model.f0.out_channels},
        {"eps", rc.model.f0.eps},
        {"slope", rc.model.f0.slope}}},
      {"spk",
       {{"n_mels", rc.model.spk.n_mels},
        {"hidden", rc.model.spk.hidden},
        {"dim", rc.model.spk.dim},
        {"blocks", rc.model.spk.blocks},
        {"slope", rc.model.spk.slope},
        {"eps", rc.model.spk.eps},
        {"min_reference_seconds", rc.model.spk.min_reference_seconds}}},
      {"gen",
       {{"in_channels", rc.model.gen.in_channels},
        {"cond_dim", rc.model.gen.cond_dim},
        {"base_channels", rc.model.gen.base_channels},
        {"upsample", rc.model.gen.upsample},
        {"dilations", rc.model.gen.dilations},
        {"pre_kernel", rc.model.gen.pre_kernel},
        {"res_kernel", rc.model.gen.res_kernel},
        {"out_kernel", rc.model.gen.out_kernel},
        {"slope", rc.model.gen.slope}}},
      {"disc",
       {{"periods", rc.model.disc.periods},
        {"mpd_channels", rc.model.disc.mpd_channels},
        {"msd_scales", rc.model.disc.msd_scales},
        {"msd_channels", rc.model.disc.msd_channels},
        {"msd_kernels", rc.model.disc.msd_kernels},
        {"slope", rc.model.disc.slope},
        {"min_input", rc.model.disc.min_input}}},
      {"rec_mel", detail::mel_to_json(rc.model.rec_mel)},
      {"spk_mel", detail::mel_to_json(rc.model.spk_mel)}};
  j["train"] = {{"adam",
                 {{"lr0", rc.train.adam.lr0},
                  {"beta1", rc.train.adam.beta1},
                  {"beta2", rc.train.adam.beta2},
                  {"eps", rc.train.adam.eps},
                  {"gamma", rc.train.adam.gamma}}},
                {"weights",
                 {{"lambda_rec", rc.train.weights.lambda_rec},
                  {"lambda_advp", rc.train.weights.lambda_advp},
                  {"lambda_fm", rc.train.weights.lambda_fm},
                  {"lambda_spk", rc.train.weights.lambda_spk}}},
                {"epochs", rc.train.epochs},
                {"batch_size", rc.train.batch_size},
                {"segment_frames", rc.train.segment_frames},
                {"seed", rc.train.seed}};
  j["f0_extract"] = {{"method", rc.f0ex.method == F0Method::kBuiltin ? "builtin" : "external"},
                     {"external_cmd", rc.f0ex.external_cmd},
                     {"fmin", rc.f0ex.fmin},
                     {"fmax", rc.f0ex.fmax},
                     {"voicing_threshold", rc.f0ex.voicing_threshold},
                     {"hop", rc.f0ex.hop},
                     {"win", rc.f0ex.win}};
  j["content_encoder"] = rc.content_encoder;
  j["eval_pairs_per_category"] = rc.eval_pairs_per_category;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig rc;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("content_dim")) m.at("content_dim").get_to(rc.model.content_dim);
    if (m.contains("f0")) {
      const auto& f = m.at("f0");
      if (f.contains("hidden1")) f.at("hidden1").get_to(rc.model.f0.hidden1);
      if (f.contains("hidden2")) f.at("hidden2").get_to(rc.model.f0.hidden2);
      if (f.contains("out_channels")) f.at("out_channels").get_to(rc.model.f0.out_channels);
      if (f.contains("eps")) f.at("eps").get_to(rc.model.f0.eps);
      if (f.contains("slope")) f.at("slope").get_to(rc.model.f0.slope);
    }
    if (m.contains("spk")) {
      const auto& s = m.at("spk");
      if (s.contains("n_mels")) s.at("n_mels").get_to(rc.model.spk.n_mels);
      if (s.contains("hidden")) s.at("hidden").get_to(rc.model.spk.hidden);
      if (s.contains("dim")) s.at("dim").get_to(rc.model.spk.dim);
      if (s.contains("blocks")) s.at("blocks").get_to(rc.model.spk.blocks);
      if (s.contains("slope")) s.at("slope").get_to(rc.model.spk.slope);
      if (s.contains("eps")) s.at("eps").get_to(rc.model.spk.eps);
      if (s.contains("min_reference_seconds"))
        s.at("min_reference_seconds").get_to(rc.model.spk.min_reference_seconds);
    }
    if (m.contains("gen")) {
      const auto& g = m.at("gen");
      if (g.contains("in_channels")) g.at("in_channels").get_to(rc.model.gen.in_channels);
      if (g.contains("cond_dim")) g.at("cond_dim").get_to(rc.model.gen.cond_dim);
      if (g.contains("base_channels")) g.at("base_channels").get_to(rc.model.gen.base_channels);
      if (g.contains("upsample")) g.at("upsample").get_to(rc.model.gen.upsample);
      if (g.contains("dilations")) g.at("dilations").get_to(rc.model.gen.dilations);
      if (g.contains("pre_kernel")) g.at("pre_kernel").get_to(rc.model.gen.pre_kernel);
      if (g.contains("res_kernel")) g.at("res_kernel").get_to(rc.model.gen.res_kernel);
      if (g.contains("out_kernel")) g.at("out_kernel").get_to(rc.model.gen.out_kernel);
      if (g.contains("slope")) g.at("slope").get_to(rc.model.gen.slope);
    }
    if (m.contains("disc")) {
      const auto& d = m.at("disc");
      if (d.contains("periods")) d.at("periods").get_to(rc.model.disc.periods);
      if (d.contains("mpd_channels")) d.at("mpd_channels").get_to(rc.model.disc.mpd_channels);
      if (d.contains("msd_scales")) d.at("msd_scales").get_to(rc.model.disc.msd_scales);
      if (d.contains("msd_channels")) d.at("msd_channels").get_to(rc.model.disc.msd_channels);
      if (d.contains("msd_kernels")) d.at("msd_kernels").get_to(rc.model.disc.msd_kernels);
      if (d.contains("slope")) d.at("slope").get_to(rc.model.disc.slope);
      if (d.contains("min_input")) d.at("min_input").get_to(rc.model.disc.min_input);
    }
    if (m.contains("rec_mel")) detail::mel_from_json(m.at("rec_mel"), &rc.model.rec_mel);
    if (m.contains("spk_mel")) detail::mel_from_json(m.at("spk_mel"), &rc.model.spk_mel);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("adam")) {
      const auto& a = t.at("adam");
      if (a.contains("lr0")) a.at("lr0").get_to(rc.train.adam.lr0);
      if (a.contains("beta1")) a.at("beta1").get_to(rc.train.adam.beta1);
      if (a.contains("beta2")) a.at("beta2").get_to(rc.train.adam.beta2);
      if (a.contains("eps")) a.at("eps").get_to(rc.train.adam.eps);
      if (a.contains("gamma")) a.at("gamma").get_to(rc.train.adam.gamma);
    }
    if (t.contains("weights")) {
      const auto& w = t.at("weights");
      if (w.contains("lambda_rec")) w.at("lambda_rec").get_to(rc.train.weights.lambda_rec);
      if (w.contains("lambda_advp")) w.at("lambda_advp").get_to(rc.train.weights.lambda_advp);
      if (w.contains("lambda_fm")) w.at("lambda_fm").get_to(rc.train.weights.lambda_fm);
      if (w.contains("lambda_spk")) w.at("lambda_spk").get_to(rc.train.weights.lambda_spk);
    }
    if (t.contains("epochs")) t.at("epochs").get_to(rc.train.epochs);
    if (t.contains("batch_size")) t.at("batch_size").get_to(rc.train.batch_size);
    if (t.contains("segment_frames")) t.at("segment_frames").get_to(rc.train.segment_frames);
    if (t.contains("seed")) t.at("seed").get_to(rc.train.seed);
  }
  if (j.contains("f0_extract")) {
    const auto& f = j.at("f0_extract");
    if (f.contains("method")) {
      const std::string m = f.at("method").get<std::string>();
      if (m == "builtin") rc.f0ex.method = F0Method::kBuiltin;
      else if (m == "external") rc.f0ex.method = F0Method::kExternal;
      else throw ConfigError("run config: unknown f0 method '" + m + "'");
    }
    if (f.contains("external_cmd")) f.at("external_cmd").get_to(rc.f0ex.external_cmd);
    if (f.contains("fmin")) f.at("fmin").get_to(rc.f0ex.fmin);
    if (f.contains("fmax")) f.at("fmax").get_to(rc.f0ex.fmax);
    if (f.contains("voicing_threshold"))
      f.at("voicing_threshold").get_to(rc.f0ex.voicing_threshold);
    if (f.contains("hop")) f.at("hop").get_to(rc.f0ex.hop);
    if (f.contains("win")) f.at("win").get_to(rc.f0ex.win);
  }
  if (j.contains("content_encoder")) j.at("content_encoder").get_to(rc.content_encoder);
  if (j.contains("eval_pairs_per_category"))
    j.at("eval_pairs_per_category").get_to(rc.eval_pairs_per_category);
  rc.validate();
  return rc;
}

/// Canonical serialization: alphabetical keys, two-space indent. This exact
/// text is embedded in checkpoints and hashed, so the same settings always
/// produce the same hash.
inline std::string config_text(const RunConfig& rc) { return to_json(rc).dump(2); }

inline uint64_t config_hash(const RunConfig& rc) { return fnv1a64(config_text(rc)); }

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: parse failure: ") + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: bad field: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("run config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

}  // namespace vcpipe
