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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace asrkit {

// The eleven target languages, with the five English accent varieties kept
// as separate tags so they can be reported as separate rows.
enum class Language : std::uint8_t {
  kEnglishAmerican,
  kEnglishAustralian,
  kEnglishBritish,
  kEnglishFilipino,
  kEnglishIndian,
  kFrench,
  kGerman,
  kItalian,
  kJapanese,
  kKorean,
  kPortuguese,
  kRussian,
  kSpanish,
  kThai,
  kVietnamese,
};

inline constexpr std::size_t kNumLanguages = 15;

// All tags in canonical (reporting) order.
const std::array<Language, kNumLanguages>& all_languages();

enum class Metric : std::uint8_t { kWer, kCer };
enum class TokenMode : std::uint8_t { kWord, kChar };

std::string_view to_string(Language lang);
std::string_view to_string(Metric metric);
std::string_view to_string(TokenMode mode);

// Case-insensitive match against the canonical names ("English-American",
// "French", ...). Anything else yields nullopt; there is no fallback tag.
std::optional<Language> parse_language(std::string_view name);

// Same, but throws InputError naming the offending string.
Language parse_language_or_throw(std::string_view name);

// Default metric: character error rate for Japanese, Korean and Thai, word
// error rate for everything else.
Metric metric_for(Language lang);

// Default tokenization unit; character mode exactly for the CER languages.
TokenMode mode_for(Language lang);

// Per-language scoring rules: metric, token mode and the punctuation set
// stripped during normalization. Built-in defaults can be overridden from a
// JSON config file of the form
//
//   { "Japanese": { "metric": "cer", "mode": "char", "punctuation": "、。" },
//     "French":   { "punctuation": ".,;:!?" } }
//
// Entries and fields are both optional; anything absent keeps its default.
class LanguageConfig {
 public:
  // Built-in defaults for every tag.
  LanguageConfig();

  // Shared immutable default instance.
  static const LanguageConfig& defaults();

  // Defaults overlaid with the entries of `file`. Unknown language keys,
  // unknown field values or non-JSON content are errors.
  static LanguageConfig load(const std::filesystem::path& file);

  Metric metric(Language lang) const;
  TokenMode mode(Language lang) const;
  bool is_punctuation(Language lang, char32_t cp) const;

  void set_metric(Language lang, Metric metric);
  void set_mode(Language lang, TokenMode mode);
  // Replaces the punctuation set with the characters of `chars` (UTF-8).
  void set_punctuation(Language lang, std::string_view chars);

 private:
  struct Rules {
    Metric metric;
    TokenMode mode;
    std::unordered_set<char32_t> punctuation;
  };
  std::array<Rules, kNumLanguages> rules_;
};

}  // namespace asrkit
