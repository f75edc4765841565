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

#include "asrkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace asrkit {

namespace {

std::string format_pct(double rate) {
  if (std::isnan(rate)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", rate * 100.0);
  return buf;
}

}  // namespace

UtteranceScore score_utterance(const Transcript& ref, const Transcript& hyp) {
  if (ref.language != hyp.language) {
    throw InputError(std::string("score_utterance: language mismatch (reference ") +
                     std::string(to_string(ref.language)) + ", hypothesis " +
                     std::string(to_string(hyp.language)) + ")");
  }
  const EditCounts counts = edit_distance(ref.tokens, hyp.tokens);
  UtteranceScore score;
  score.substitutions = counts.substitutions;
  score.deletions = counts.deletions;
  score.insertions = counts.insertions;
  score.ref_len = static_cast<std::int64_t>(ref.tokens.size());
  score.language = ref.language;
  return score;
}

void ScoreAccumulator::add(const UtteranceScore& score) {
  LanguageStats& stats = per_language_[score.language];
  stats.ref_units += score.ref_len;
  stats.error_units += score.error_units();
  stats.utterances += 1;
}

void ScoreAccumulator::merge(const ScoreAccumulator& other) {
  for (const auto& [lang, stats] : other.per_language_) {
    LanguageStats& mine = per_language_[lang];
    mine.ref_units += stats.ref_units;
    mine.error_units += stats.error_units;
    mine.utterances += stats.utterances;
  }
}

ScoreReport ScoreAccumulator::report() const {
  if (per_language_.empty()) {
    throw InputError("aggregate: no utterance scores to aggregate");
  }
  ScoreReport report;
  report.per_language = per_language_;

  double macro_sum = 0.0;
  std::int64_t macro_count = 0;
  for (const auto& [lang, stats] : per_language_) {
    report.total_ref_units += stats.ref_units;
    report.total_error_units += stats.error_units;
    report.total_utterances += stats.utterances;
    if (stats.rate_defined()) {
      macro_sum += stats.error_rate();
      macro_count += 1;
    }
  }
  if (report.total_ref_units > 0) {
    report.mer_pooled = static_cast<double>(report.total_error_units) /
                        static_cast<double>(report.total_ref_units);
  }
  if (macro_count > 0) {
    report.mer_macro = macro_sum / static_cast<double>(macro_count);
  }
  return report;
}

ScoreReport aggregate(std::span<const UtteranceScore> scores) {
  ScoreAccumulator acc;
  for (const UtteranceScore& score : scores) acc.add(score);
  return acc.report();
}

std::string ScoreReport::to_json() const {
  nlohmann::json doc;
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [lang, stats] : per_language) {
    nlohmann::json row;
    row["ref_units"] = stats.ref_units;
    row["error_units"] = stats.error_units;
    row["utterances"] = stats.utterances;
    if (stats.rate_defined()) {
      row["error_rate"] = stats.error_rate();
    } else {
      row["error_rate"] = nullptr;
    }
    langs[std::string(to_string(lang))] = std::move(row);
  }
  doc["per_language"] = std::move(langs);
  doc["totals"] = {{"ref_units", total_ref_units},
                   {"error_units", total_error_units},
                   {"utterances", total_utterances}};
  doc["mer_pooled"] = std::isnan(mer_pooled) ? nlohmann::json(nullptr) : nlohmann::json(mer_pooled);
  doc["mer_macro"] = std::isnan(mer_macro) ? nlohmann::json(nullptr) : nlohmann::json(mer_macro);
  return doc.dump(2) + "\n";
}

std::string ScoreReport::to_tsv(const LanguageConfig& config) const {
  std::ostringstream out;
  out << "language\tmetric\terror_rate_pct\tref_units\terror_units\tutterances\n";
  for (const auto& [lang, stats] : per_language) {
    out << to_string(lang) << '\t' << to_string(config.metric(lang)) << '\t'
        << format_pct(stats.error_rate()) << '\t' << stats.ref_units << '\t'
        << stats.error_units << '\t' << stats.utterances << '\n';
  }
  out << "MER-pooled\tmer\t" << format_pct(mer_pooled) << '\t' << total_ref_units << '\t'
      << total_error_units << '\t' << total_utterances << '\n';
  out << "MER-macro\tmer\t" << format_pct(mer_macro) << '\t' << total_ref_units << '\t'
      << total_error_units << '\t' << total_utterances << '\n';
  return out.str();
}

std::vector<HallucinationFlag> detect_hallucination(std::span<const std::string> tokens,
                                                    const HallucinationParams& params) {
  if (params.n_min < 1 || params.n_min > params.n_max) {
    throw InputError("detect_hallucination: need 1 <= n_min <= n_max");
  }
  if (params.min_repeats < 2) {
    throw InputError("detect_hallucination: min_repeats must be >= 2");
  }

  const std::size_t len = tokens.size();
  struct Candidate {
    std::size_t start = 0;
    std::size_t period = 0;
    std::size_t repeats = 0;
    std::size_t span() const { return period * repeats; }
    std::size_t end() const { return start + span(); }
  };

  std::vector<Candidate> candidates;
  for (std::size_t start = 0; start < len; ++start) {
    Candidate best;
    for (std::size_t n = params.n_min; n <= params.n_max && start + n <= len; ++n) {
      std::size_t repeats = 1;
      while (start + (repeats + 1) * n <= len &&
             std::equal(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                        tokens.begin() + static_cast<std::ptrdiff_t>(start + n),
                        tokens.begin() + static_cast<std::ptrdiff_t>(start + repeats * n))) {
        ++repeats;
      }
      if (repeats < params.min_repeats) continue;
      const std::size_t span = n * repeats;
      if (span > best.span()) best = Candidate{start, n, repeats};
    }
    if (best.repeats > 0) candidates.push_back(best);
  }

  // Drop runs contained in a longer reported run (e.g. the same repetition
  // re-detected one period later).
  std::vector<HallucinationFlag> flags;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    bool contained = false;
    for (std::size_t j = 0; j < candidates.size() && !contained; ++j) {
      if (j == i) continue;
      const Candidate& other = candidates[j];
      if (other.start <= c.start && c.end() <= other.end() &&
          (other.start < c.start || other.end() > c.end())) {
        contained = true;
      }
    }
    if (contained) continue;
    HallucinationFlag flag;
    flag.ngram.assign(tokens.begin() + static_cast<std::ptrdiff_t>(c.start),
                      tokens.begin() + static_cast<std::ptrdiff_t>(c.start + c.period));
    flag.repeat_count = c.repeats;
    flag.span_start = c.start;
    flags.push_back(std::move(flag));
  }
  return flags;
}

std::vector<ScoreFileLine> parse_score_file(std::string_view text, const std::string& source) {
  std::vector<ScoreFileLine> lines;
  std::unordered_set<std::string> seen_ids;
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

    const std::string where = source + ": line " + std::to_string(line_no) + ": ";
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = (tab1 == std::string_view::npos) ? std::string_view::npos
                                                              : line.find('\t', tab1 + 1);
    if (tab1 == std::string_view::npos || tab2 == std::string_view::npos) {
      throw FormatError(where +
                        "expected three tab-separated fields (utterance_id, language, text)");
    }
    ScoreFileLine entry;
    entry.utterance_id = std::string(line.substr(0, tab1));
    if (entry.utterance_id.empty()) throw FormatError(where + "utterance_id is empty");
    const std::string_view lang_field = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const auto lang = parse_language(lang_field);
    if (!lang) {
      throw FormatError(where + "unknown language \"" + std::string(lang_field) + "\"");
    }
    entry.language = *lang;
    entry.text = std::string(line.substr(tab2 + 1));
    if (!seen_ids.insert(entry.utterance_id).second) {
      throw FormatError(where + "duplicate utterance_id \"" + entry.utterance_id + "\"");
    }
    lines.push_back(std::move(entry));
  }
  return lines;
}

std::vector<ScoreFileLine> load_score_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open scoring file: " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_score_file(buffer.str(), file.string());
}

}  // namespace asrkit
