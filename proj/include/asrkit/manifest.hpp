// Copyright 2025-2026 The mlc-asr-kit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrkit/language.hpp"

namespace asrkit {

// One utterance record. Manifest files hold one JSON object per line with
// exactly these six fields.
struct ManifestEntry {
  std::string utterance_id;
  std::string audio_path;
  std::string text;
  Language language = Language::kEnglishAmerican;
  double duration_s = 0.0;
  std::string corpus;

  bool operator==(const ManifestEntry&) const = default;
};

// Loads and validates a manifest. Problems are collected per line and the
// load fails with the full list, so one pass reports every defect. Blank
// lines are skipped; entry order is preserved.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& file);
std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::string& source);

std::string render_manifest(std::span<const ManifestEntry> entries);
void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& file);

// Concatenates manifests with corpus-qualified utterance ids
// (`corpus/original_id`). With dedup, entries identical in (audio_path,
// text) collapse to the first occurrence. Duplicate copies surviving under
// one qualified id get #2, #3, ... occurrence suffixes; a qualified-id
// collision between entries with different content is an error.
std::vector<ManifestEntry> merge(std::span<const std::vector<ManifestEntry>> manifests,
                                 bool dedup);

// Hour accounting per (corpus, language) cell. Seconds are summed per cell;
// language totals and the grand total are folded from the cells so the three
// levels are always consistent.
struct DurationReport {
  std::map<std::string, std::map<Language, double>> cell_seconds;
  std::map<Language, double> language_seconds;
  double total_seconds = 0.0;

  double total_hours() const { return total_seconds / 3600.0; }

  // TSV table: one row per corpus, one column per language present, plus a
  // total column and a TOTAL row. Hours with one decimal.
  std::string to_tsv() const;
  // JSON document with the same three levels.
  std::string to_json() const;
};

DurationReport duration_report(std::span<const ManifestEntry> entries);

}  // namespace asrkit
