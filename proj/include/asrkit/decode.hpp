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
#include <utility>
#include <vector>

#include "asrkit/language.hpp"

namespace asrkit {

// Next-token scoring interface the decoder runs against. The context string
// is an opaque conditioning handle: the decoder passes it through untouched.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual int vocab_size() const = 0;

  // Log-probabilities over the full vocabulary for the token following
  // `prefix`. Entries may be -inf for tokens the scorer itself rules out;
  // the returned vector must have exactly vocab_size() entries.
  virtual std::vector<double> score(std::span<const int> prefix,
                                    const std::string& context) const = 0;
};

struct DecodeConfig {
  int beam_width = 4;
  int no_repeat_ngram = 5;  // 0 disables blocking
  int max_len = 0;          // required, >= 1
  double length_penalty = 0.0;
  int eos_id = 0;
};

struct DecodeResult {
  std::vector<int> tokens;  // generated tokens, end-of-sequence excluded
  double log_prob = 0.0;    // cumulative log-probability including the eos step
};

// Token ids whose appending to `prefix` would recreate an n-gram already
// present in `prefix`. Sorted ascending. Empty whenever |prefix| < n-1.
std::vector<int> banned_tokens(std::span<const int> prefix, int n);

// Beam search over `scorer`, keeping the `beam_width` best prefixes per step
// under cumulative log-probability. Tokens banned by the no-repeat-ngram
// rule get probability zero; a hypothesis with no viable continuation is
// finalized as-is. Hypotheses end at eos_id or max_len tokens. The best
// finished hypothesis under length_penalty-normalized score wins; ties break
// toward the lexicographically smaller token sequence, so the result is
// deterministic for a deterministic scorer.
DecodeResult beam_search(const std::string& context, const Scorer& scorer,
                         const DecodeConfig& cfg);

// Per-language decoding prompts. The builtin registry carries the English
// prompt plus marked placeholders for the other languages; a user-supplied
// registry file replaces it outright, and asking it for a missing tag is an
// error rather than a fallback.
class PromptRegistry {
 public:
  static const PromptRegistry& builtin();

  // JSON object mapping canonical language names to prompt strings.
  static PromptRegistry load(const std::filesystem::path& file);

  // Returns the prompt byte-identical to its source; throws InputError when
  // the tag has no entry.
  const std::string& get(Language lang) const;

  bool contains(Language lang) const { return entries_.contains(lang); }
  const std::map<Language, std::string>& entries() const { return entries_; }
  void set(Language lang, std::string prompt) { entries_[lang] = std::move(prompt); }

 private:
  std::map<Language, std::string> entries_;
};

std::string get_prompt(Language lang, const PromptRegistry& registry);

// Deterministic table-driven scorer for tests and decode simulation.
// Each context owns rows of (prefix suffix -> log-prob vector); scoring
// picks the row with the longest suffix matching the current prefix. A row
// with an empty suffix acts as the default and should always be present.
class TableScorer : public Scorer {
 public:
  struct Row {
    std::vector<int> suffix;
    std::vector<double> log_probs;
  };

  TableScorer(int vocab_size, int eos_id);

  // JSON document:
  //   { "vocab_size": 3, "eos_id": 0,
  //     "entries": [ {"context": "utt1", "suffix": [1,2], "log_probs": [...]}, ... ] }
  static TableScorer load(const std::filesystem::path& file);

  void add_row(const std::string& context, std::vector<int> suffix,
               std::vector<double> log_probs);

  int vocab_size() const override { return vocab_size_; }
  int eos_id() const { return eos_id_; }
  std::vector<double> score(std::span<const int> prefix,
                            const std::string& context) const override;

 private:
  int vocab_size_;
  int eos_id_;
  // Rows per context, kept sorted by descending suffix length.
  std::map<std::string, std::vector<Row>> contexts_;
};

}  // namespace asrkit
