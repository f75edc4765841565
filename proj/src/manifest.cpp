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

#include "asrkit/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "asrkit/errors.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

const char* const kFields[] = {"utterance_id", "audio_path", "text",
                               "language",     "duration_s", "corpus"};

std::string parse_line(const nlohmann::json& doc, ManifestEntry& entry) {
  if (!doc.is_object()) return "record must be a JSON object";
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find_if(std::begin(kFields), std::end(kFields),
                     [&key](const char* f) { return key == f; }) == std::end(kFields)) {
      return "unexpected field \"" + key + "\"";
    }
  }
  for (const char* field : kFields) {
    if (!doc.contains(field)) return std::string("missing field \"") + field + "\"";
  }

  const auto& id = doc.at("utterance_id");
  if (!id.is_string() || id.get_ref<const std::string&>().empty()) {
    return "utterance_id must be a non-empty string";
  }
  entry.utterance_id = id.get<std::string>();

  const auto& path = doc.at("audio_path");
  if (!path.is_string() || path.get_ref<const std::string&>().empty()) {
    return "audio_path must be a non-empty string";
  }
  entry.audio_path = path.get<std::string>();

  const auto& text = doc.at("text");
  if (!text.is_string()) return "text must be a string";
  entry.text = text.get<std::string>();

  const auto& lang = doc.at("language");
  if (!lang.is_string()) return "language must be a string";
  const auto parsed = parse_language(lang.get_ref<const std::string&>());
  if (!parsed) return "unknown language \"" + lang.get<std::string>() + "\"";
  entry.language = *parsed;

  const auto& duration = doc.at("duration_s");
  if (!duration.is_number()) return "duration_s must be a number";
  entry.duration_s = duration.get<double>();
  if (!(entry.duration_s > 0.0) || !std::isfinite(entry.duration_s)) {
    return "duration_s must be a positive finite number";
  }

  const auto& corpus = doc.at("corpus");
  if (!corpus.is_string() || corpus.get_ref<const std::string&>().empty()) {
    return "corpus must be a non-empty string";
  }
  entry.corpus = corpus.get<std::string>();
  return {};
}

std::string format_hours(double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", seconds / 3600.0);
  return buf;
}

double rounded_hours(double seconds) {
  return std::round(seconds / 3600.0 * 10.0) / 10.0;
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view text, const std::string& source) {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> problems;
  std::unordered_map<std::string, std::size_t> id_lines;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos) ? text.substr(pos)
                                                            : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      problems.push_back("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
      continue;
    }
    ManifestEntry entry;
    if (std::string problem = parse_line(doc, entry); !problem.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": " + problem);
      continue;
    }
    const auto [it, inserted] = id_lines.emplace(entry.utterance_id, line_no);
    if (!inserted) {
      problems.push_back("line " + std::to_string(line_no) + ": utterance_id \"" +
                         entry.utterance_id + "\" already used on line " +
                         std::to_string(it->second));
      continue;
    }
    entries.push_back(std::move(entry));
  }

  if (!problems.empty()) {
    std::string message = "manifest " + source + ": " + std::to_string(problems.size()) +
                          (problems.size() == 1 ? " error:" : " errors:");
    for (const std::string& p : problems) message += "\n  " + p;
    throw FormatError(message);
  }
  return entries;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open manifest: " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), file.string());
}

std::string render_manifest(std::span<const ManifestEntry> entries) {
  std::string out;
  for (const ManifestEntry& entry : entries) {
    nlohmann::json doc = {{"utterance_id", entry.utterance_id},
                          {"audio_path", entry.audio_path},
                          {"text", entry.text},
                          {"language", std::string(to_string(entry.language))},
                          {"duration_s", entry.duration_s},
                          {"corpus", entry.corpus}};
    out += doc.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write manifest: " + file.string());
  const std::string text = render_manifest(entries);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw InputError("write failed for manifest: " + file.string());
}

std::vector<ManifestEntry> merge(std::span<const std::vector<ManifestEntry>> manifests,
                                 bool dedup) {
  std::vector<ManifestEntry> pool;
  for (const auto& manifest : manifests) {
    pool.insert(pool.end(), manifest.begin(), manifest.end());
  }

  if (dedup) {
    std::vector<ManifestEntry> kept;
    std::unordered_map<std::string, std::size_t> seen;  // (audio_path, text) -> index
    for (ManifestEntry& entry : pool) {
      std::string key = entry.audio_path;
      key += '\0';
      key += entry.text;
      if (seen.emplace(std::move(key), kept.size()).second) {
        kept.push_back(std::move(entry));
      }
    }
    pool = std::move(kept);
  }

  // Qualify ids, then disambiguate surviving duplicate copies.
  struct Claim {
    std::size_t first_index;
    std::size_t copies;
  };
  std::unordered_map<std::string, Claim> claims;
  std::vector<ManifestEntry> out;
  out.reserve(pool.size());
  for (ManifestEntry& entry : pool) {
    std::string qualified = entry.corpus + "/" + entry.utterance_id;
    const auto [it, inserted] = claims.emplace(qualified, Claim{out.size(), 1});
    if (!inserted) {
      const ManifestEntry& first = out[it->second.first_index];
      const bool same_content = first.audio_path == entry.audio_path && first.text == entry.text;
      if (!same_content) {
        throw InputError("manifest merge: utterance id \"" + qualified +
                         "\" collides across inputs with different content");
      }
      std::string candidate;
      do {
        candidate = qualified + "#" + std::to_string(++it->second.copies);
      } while (claims.contains(candidate));
      claims.emplace(candidate, Claim{out.size(), 1});
      qualified = std::move(candidate);
    }
    entry.utterance_id = std::move(qualified);
    out.push_back(std::move(entry));
  }
  return out;
}

DurationReport duration_report(std::span<const ManifestEntry> entries) {
  DurationReport report;
  for (const ManifestEntry& entry : entries) {
    report.cell_seconds[entry.corpus][entry.language] += entry.duration_s;
  }
  for (const auto& [corpus, row] : report.cell_seconds) {
    (void)corpus;
    for (const auto& [language, seconds] : row) {
      report.language_seconds[language] += seconds;
      report.total_seconds += seconds;
    }
  }
  return report;
}

std::string DurationReport::to_tsv() const {
  std::vector<Language> columns;
  for (const auto& [language, seconds] : language_seconds) {
    (void)seconds;
    columns.push_back(language);
  }

  std::string out = "corpus";
  for (Language lang : columns) {
    out += '\t';
    out += to_string(lang);
  }
  out += "\ttotal\n";

  for (const auto& [corpus, row] : cell_seconds) {
    out += corpus;
    double corpus_seconds = 0.0;
    for (Language lang : columns) {
      const auto it = row.find(lang);
      const double seconds = (it == row.end()) ? 0.0 : it->second;
      corpus_seconds += seconds;
      out += '\t';
      out += format_hours(seconds);
    }
    out += '\t';
    out += format_hours(corpus_seconds);
    out += '\n';
  }

  out += "TOTAL";
  for (Language lang : columns) {
    out += '\t';
    out += format_hours(language_seconds.at(lang));
  }
  out += '\t';
  out += format_hours(total_seconds);
  out += '\n';
  return out;
}

std::string DurationReport::to_json() const {
  nlohmann::json corpora = nlohmann::json::object();
  for (const auto& [corpus, row] : cell_seconds) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& [language, seconds] : row) {
      cells[std::string(to_string(language))] = rounded_hours(seconds);
    }
    corpora[corpus] = std::move(cells);
  }
  nlohmann::json languages = nlohmann::json::object();
  for (const auto& [language, seconds] : language_seconds) {
    languages[std::string(to_string(language))] = rounded_hours(seconds);
  }
  nlohmann::json doc = {{"corpora", std::move(corpora)},
                        {"languages", std::move(languages)},
                        {"total_hours", rounded_hours(total_seconds)}};
  return doc.dump(2) + "\n";
}

}  // namespace asrkit
