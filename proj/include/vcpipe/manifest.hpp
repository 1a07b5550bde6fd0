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
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vcpipe/errors.hpp"

namespace vcpipe {

/// One utterance row: tab-separated (id, speaker, path, transcript, split)
/// on disk. The split tag is "train", "test", or "" before splitting.
struct ManifestEntry {
  std::string id;
  std::string speaker;
  std::string path;
  std::string transcript;
  std::string split;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::set<std::string> speakers(const std::string& split = "") const {
    std::set<std::string> out;
    for (const auto& e : entries)
      if (split.empty() || e.split == split) out.insert(e.speaker);
    return out;
  }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries) {
      if (e.id.empty() || e.speaker.empty() || e.path.empty())
        throw ContractError("manifest: id, speaker, and path are required");
      if (!ids.insert(e.id).second)
        throw ContractError("manifest: duplicate utterance id '" + e.id + "'");
      if (!e.split.empty() && e.split != "train" && e.split != "test")
        throw ContractError("manifest: unknown split tag '" + e.split + "'");
    }
    // a speaker never straddles the split boundary
    const auto tr = speakers("train");
    for (const auto& s : speakers("test"))
      if (tr.count(s))
        throw ContractError("manifest: speaker '" + s + "' appears in both splits");
  }
};

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open '" + path + "'");
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t i = 0;
    while (cols.size() < 5) {
      size_t j = line.find('\t', i);
      if (j == std::string::npos) {
        cols.push_back(line.substr(i));
        break;
      }
      cols.push_back(line.substr(i, j - i));
      i = j + 1;
    }
    if (cols.size() < 4)
      throw IoError("manifest: line " + std::to_string(lineno) + " of '" + path +
                    "' has fewer than 4 tab-separated fields");
    ManifestEntry e;
    e.id = cols[0];
    e.speaker = cols[1];
    e.path = cols[2];
    e.transcript = cols[3];
    if (cols.size() > 4) e.split = cols[4];
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw IoError("manifest: cannot write '" + path + "'");
  for (const auto& e : m.entries)
    out << e.id << '\t' << e.speaker << '\t' << e.path << '\t' << e.transcript << '\t' << e.split
        << '\n';
  if (!out) throw IoError("manifest: write to '" + path + "' failed");
}

/// Speaker gender table: 'F', 'M', or 'U' for unknown. The file format is
/// one speaker per line, id first, gender as the first later field that is a
/// bare F or M (age or other columns in between are skipped); '#' comments
/// and a header line starting with "ID" are ignored.
inline std::map<std::string, char> read_speaker_info(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("speaker info: cannot open '" + path + "'");
  std::map<std::string, char> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id) || id.empty() || id[0] == '#' || id == "ID") continue;
    char g = 'U';
    std::string tok;
    while (ls >> tok) {
      if (tok == "F" || tok == "M") {
        g = tok[0];
        break;
      }
    }
    out[id] = g;
  }
  return out;
}

/// Moves `holdout` whole speakers to the test split, the rest to train.
/// Balanced by gender where the table allows: half the slots go to each of F
/// and M, the odd slot and any shortfall filled from the remaining speakers.
/// Deterministic in (manifest order-independent speaker set, seed).
inline Manifest make_split(const Manifest& manifest, const std::map<std::string, char>& gender,
                           int holdout = 6, uint64_t seed = 0) {
  if (holdout < 1) throw ContractError("split: holdout must be at least 1");
  std::set<std::string> all = manifest.speakers();
  if (static_cast<int>(all.size()) < holdout + 2)
    throw ContractError("split: need at least " + std::to_string(holdout + 2) +
                        " speakers, have " + std::to_string(all.size()));

  // sorted pools, then one seeded shuffle each: independent of entry order
  std::vector<std::string> fs, ms, rest;
  for (const auto& s : all) {
    auto it = gender.find(s);
    const char g = it == gender.end() ? 'U' : it->second;
    (g == 'F' ? fs : g == 'M' ? ms : rest).push_back(s);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(fs.begin(), fs.end(), rng);
  std::shuffle(ms.begin(), ms.end(), rng);
  std::shuffle(rest.begin(), rest.end(), rng);

  std::set<std::string> test;
  size_t fi = 0, mi = 0, ri = 0;
  const int want_f = holdout / 2;
  const int want_m = holdout / 2;
  while (static_cast<int>(test.size()) < want_f && fi < fs.size()) test.insert(fs[fi++]);
  while (static_cast<int>(test.size()) < want_f + want_m && mi < ms.size()) test.insert(ms[mi++]);
  // odd slot and shortfall: alternate the leftover pools, unknowns last
  while (static_cast<int>(test.size()) < holdout) {
    if (fi < fs.size() && fs.size() - fi >= ms.size() - mi) test.insert(fs[fi++]);
    else if (mi < ms.size()) test.insert(ms[mi++]);
    else if (fi < fs.size()) test.insert(fs[fi++]);
    else if (ri < rest.size()) test.insert(rest[ri++]);
    else throw ContractError("split: ran out of speakers filling the holdout");
  }

  Manifest out = manifest;
  for (auto& e : out.entries) e.split = test.count(e.speaker) ? "test" : "train";
  out.validate();
  return out;
}

}  // namespace vcpipe
