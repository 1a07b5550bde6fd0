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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vcpipe/audio.hpp"
#include "vcpipe/errors.hpp"
#include "vcpipe/f0.hpp"

namespace vcpipe {

/// The pinned text normalizer behind every error-rate number: lowercase,
/// punctuation stripped except apostrophes, runs of whitespace collapsed to
/// single spaces, no leading or trailing space.
inline std::string normalize_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    char keep = 0;
    if (std::isalnum(c)) keep = static_cast<char>(std::tolower(c));
    else if (c == '\'') keep = '\'';
    else if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    // any other punctuation separates tokens rather than vanishing inside them
    else {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(keep);
  }
  return out;
}

inline std::vector<std::string> split_words(const std::string& normalized) {
  std::vector<std::string> toks;
  size_t i = 0;
  while (i < normalized.size()) {
    size_t j = normalized.find(' ', i);
    if (j == std::string::npos) j = normalized.size();
    if (j > i) toks.push_back(normalized.substr(i, j - i));
    i = j + 1;
  }
  return toks;
}

/// Classic edit distance (insert/delete/substitute, unit costs) over any
/// token sequence with equality comparison. Two rolling rows.
template <typename Seq>
size_t levenshtein(const Seq& a, const Seq& b) {
  const size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Word error rate: token edit distance / reference token count, after
/// normalization. An empty reference has no denominator -> nullopt, and the
/// caller excludes the pair from aggregation.
inline std::optional<double> wer(const std::string& ref_text, const std::string& hyp_text) {
  const auto ref = split_words(normalize_text(ref_text));
  const auto hyp = split_words(normalize_text(hyp_text));
  if (ref.empty()) return std::nullopt;
  return static_cast<double>(levenshtein(ref, hyp)) / static_cast<double>(ref.size());
}

/// Character error rate over the normalized strings, spaces included.
inline std::optional<double> cer(const std::string& ref_text, const std::string& hyp_text) {
  const std::string ref = normalize_text(ref_text);
  const std::string hyp = normalize_text(hyp_text);
  if (ref.empty()) return std::nullopt;
  return static_cast<double>(levenshtein(ref, hyp)) / static_cast<double>(ref.size());
}

/// Pearson correlation between two pitch tracks over frames voiced in both,
/// after truncating to the common length. Linear Hz by default; log-Hz behind
/// the flag. Fewer than 10 mutually voiced frames, or a constant track,
/// leaves the coefficient undefined -> nullopt.
inline std::optional<double> pcc_tracks(const F0Track& a, const F0Track& b,
                                        bool log_hz = false) {
  a.validate();
  b.validate();
  const size_t frames = std::min(a.frames(), b.frames());
  std::vector<double> xs, ys;
  xs.reserve(frames);
  ys.reserve(frames);
  for (size_t i = 0; i < frames; ++i) {
    if (!a.voiced[i] || !b.voiced[i]) continue;
    const double x = a.f0_hz[i], y = b.f0_hz[i];
    xs.push_back(log_hz ? std::log(x) : x);
    ys.push_back(log_hz ? std::log(y) : y);
  }
  if (xs.size() < 10) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// Prosody consistency between a source recording and its conversion: pitch
/// tracks from both 24 kHz waveforms, correlated as in pcc_tracks.
inline std::optional<double> pcc(const Waveform& source, const Waveform& converted,
                                 const F0Config& cfg = {}, bool log_hz = false) {
  if (source.sample_rate != 24000 || converted.sample_rate != 24000)
    throw ContractError("pcc: both waveforms must be 24 kHz");
  return pcc_tracks(extract_f0(source, cfg), extract_f0(converted, cfg), log_hz);
}

}  // namespace vcpipe
