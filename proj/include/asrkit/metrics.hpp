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

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrkit/errors.hpp"
#include "asrkit/language.hpp"
#include "asrkit/textnorm.hpp"

namespace asrkit {

// Counts of a minimal Levenshtein alignment between a reference and a
// hypothesis. Among all alignments with minimal S+D+I, the one with the
// fewest insertions is chosen, then the fewest deletions, so the split is
// deterministic even when the total ties.
struct EditCounts {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;

  std::int64_t total() const { return substitutions + deletions + insertions; }
  bool operator==(const EditCounts&) const = default;
};

namespace detail {

// DP cells pack (total, insertions, deletions) into one integer so the
// lexicographic tie-break is a plain unsigned compare. 21 bits per count.
inline constexpr std::uint64_t kEditShiftIns = 21;
inline constexpr std::uint64_t kEditShiftTotal = 42;
inline constexpr std::uint64_t kEditCountMask = (1ULL << 21) - 1;
inline constexpr std::uint64_t kDeletionStep = (1ULL << kEditShiftTotal) | 1ULL;
inline constexpr std::uint64_t kInsertionStep = (1ULL << kEditShiftTotal) | (1ULL << kEditShiftIns);
inline constexpr std::uint64_t kSubstitutionStep = 1ULL << kEditShiftTotal;
inline constexpr std::size_t kMaxEditLength = (1ULL << 21) - 1;

}  // namespace detail

template <typename Token>
EditCounts edit_distance(std::span<const Token> ref, std::span<const Token> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  if (n > detail::kMaxEditLength || m > detail::kMaxEditLength) {
    throw InputError("edit_distance: sequence longer than " +
                     std::to_string(detail::kMaxEditLength) + " tokens");
  }

  constexpr std::size_t kStackCells = 2 * 33;
  std::array<std::uint64_t, kStackCells> stack_rows;
  std::vector<std::uint64_t> heap_rows;
  std::uint64_t* prev;
  std::uint64_t* cur;
  if (m + 1 <= kStackCells / 2) {
    prev = stack_rows.data();
    cur = stack_rows.data() + (kStackCells / 2);
  } else {
    heap_rows.resize(2 * (m + 1));
    prev = heap_rows.data();
    cur = heap_rows.data() + (m + 1);
  }

  for (std::size_t j = 0; j <= m; ++j) prev[j] = j * detail::kInsertionStep;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i * detail::kDeletionStep;
    const Token& r = ref[i - 1];
    for (std::size_t j = 1; j <= m; ++j) {
      std::uint64_t best = prev[j] + detail::kDeletionStep;
      const std::uint64_t ins = cur[j - 1] + detail::kInsertionStep;
      if (ins < best) best = ins;
      const std::uint64_t diag =
          prev[j - 1] + (r == hyp[j - 1] ? 0ULL : detail::kSubstitutionStep);
      if (diag < best) best = diag;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }

  const std::uint64_t cell = prev[m];
  EditCounts counts;
  counts.deletions = static_cast<std::int64_t>(cell & detail::kEditCountMask);
  counts.insertions = static_cast<std::int64_t>((cell >> detail::kEditShiftIns) & detail::kEditCountMask);
  counts.substitutions = static_cast<std::int64_t>(cell >> detail::kEditShiftTotal) -
                         counts.deletions - counts.insertions;
  return counts;
}

inline EditCounts edit_distance(const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp) {
  return edit_distance(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

// Edit counts of one scored utterance, plus the reference length that turns
// them into a rate. ref_len == 0 (empty reference, non-empty hypothesis) is
// legal: the rate is undefined but error_units still feed pooled MER.
struct UtteranceScore {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t ref_len = 0;
  Language language = Language::kEnglishAmerican;

  std::int64_t error_units() const { return substitutions + deletions + insertions; }
  bool rate_defined() const { return ref_len > 0; }
  double error_rate() const {
    if (!rate_defined()) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(error_units()) / static_cast<double>(ref_len);
  }
};

// Throws InputError when the transcripts carry different language tags.
UtteranceScore score_utterance(const Transcript& ref, const Transcript& hyp);

struct LanguageStats {
  std::int64_t ref_units = 0;
  std::int64_t error_units = 0;
  std::int64_t utterances = 0;

  bool rate_defined() const { return ref_units > 0; }
  double error_rate() const {
    if (!rate_defined()) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(error_units) / static_cast<double>(ref_units);
  }
};

// Per-language pooled rates plus the two cross-language aggregates:
//   mer_pooled = sum(error_units) / sum(ref_units)   (the default MER)
//   mer_macro  = unweighted mean of the defined per-language rates
struct ScoreReport {
  std::map<Language, LanguageStats> per_language;
  std::int64_t total_ref_units = 0;
  std::int64_t total_error_units = 0;
  std::int64_t total_utterances = 0;
  double mer_pooled = std::numeric_limits<double>::quiet_NaN();
  double mer_macro = std::numeric_limits<double>::quiet_NaN();

  // JSON document with per-language rows and both MER modes.
  std::string to_json() const;
  // TSV table: one row per language plus MER summary rows; rates as
  // percentages with two decimals.
  std::string to_tsv(const LanguageConfig& config = LanguageConfig::defaults()) const;
};

// Associative partial aggregation so scoring can fan out across workers and
// merge deterministically.
class ScoreAccumulator {
 public:
  void add(const UtteranceScore& score);
  void merge(const ScoreAccumulator& other);
  bool empty() const { return per_language_.empty(); }

  // Throws InputError when nothing was accumulated.
  ScoreReport report() const;

 private:
  std::map<Language, LanguageStats> per_language_;
};

// Throws InputError on an empty collection.
ScoreReport aggregate(std::span<const UtteranceScore> scores);

struct HallucinationParams {
  std::size_t n_min = 1;
  std::size_t n_max = 5;
  std::size_t min_repeats = 10;
};

// A contiguous n-gram repetition: `ngram` repeats `repeat_count` times
// starting at token index `span_start`.
struct HallucinationFlag {
  std::string utterance_id;  // filled by the caller; empty from the detector
  std::vector<std::string> ngram;
  std::size_t repeat_count = 0;
  std::size_t span_start = 0;
};

// Finds maximal contiguous n-gram repetitions (n in [n_min, n_max]) with at
// least min_repeats repeats. At each start position only the longest
// qualifying repetition is reported (ties prefer the shortest period), and
// runs whose span lies inside another reported run are dropped.
std::vector<HallucinationFlag> detect_hallucination(std::span<const std::string> tokens,
                                                    const HallucinationParams& params = {});

// One line of a scoring input file: `utterance_id<TAB>language<TAB>text`.
// Utterance ids must be unique within a file; blank lines are skipped.
struct ScoreFileLine {
  std::string utterance_id;
  Language language = Language::kEnglishAmerican;
  std::string text;

  bool operator==(const ScoreFileLine&) const = default;
};

std::vector<ScoreFileLine> parse_score_file(std::string_view text, const std::string& source);
std::vector<ScoreFileLine> load_score_file(const std::filesystem::path& file);

}  // namespace asrkit
