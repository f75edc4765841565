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

#include "asrkit/language.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "asrkit/errors.hpp"
#include "asrkit/textnorm.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

constexpr std::array<std::string_view, kNumLanguages> kLanguageNames = {
    "English-American", "English-Australian", "English-British",
    "English-Filipino", "English-Indian",     "French",
    "German",           "Italian",            "Japanese",
    "Korean",           "Portuguese",         "Russian",
    "Spanish",          "Thai",               "Vietnamese",
};

// Stripped by default during normalization. Deliberately excludes
// apostrophes (' and U+2019) and hyphens, which are often word-internal;
// override per language via the config file if the scoring rules differ.
constexpr std::string_view kDefaultPunctuation =
    ".,;:!?\"()[]{}<>«»“”„…¿¡—–·。、，！？；：（）「」『』《》〈〉・～｡､･";

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const std::array<Language, kNumLanguages>& all_languages() {
  static const std::array<Language, kNumLanguages> kAll = [] {
    std::array<Language, kNumLanguages> a{};
    for (std::size_t i = 0; i < kNumLanguages; ++i) a[i] = static_cast<Language>(i);
    return a;
  }();
  return kAll;
}

std::string_view to_string(Language lang) {
  return kLanguageNames[static_cast<std::size_t>(lang)];
}

std::string_view to_string(Metric metric) {
  return metric == Metric::kWer ? "wer" : "cer";
}

std::string_view to_string(TokenMode mode) {
  return mode == TokenMode::kWord ? "word" : "char";
}

std::optional<Language> parse_language(std::string_view name) {
  const std::string lowered = ascii_lower(name);
  for (std::size_t i = 0; i < kNumLanguages; ++i) {
    if (lowered == ascii_lower(kLanguageNames[i])) return static_cast<Language>(i);
  }
  return std::nullopt;
}

Language parse_language_or_throw(std::string_view name) {
  if (auto lang = parse_language(name)) return *lang;
  throw InputError("unknown language \"" + std::string(name) +
                   "\"; expected one of the canonical tags, e.g. \"English-American\", \"Thai\"");
}

Metric metric_for(Language lang) {
  switch (lang) {
    case Language::kJapanese:
    case Language::kKorean:
    case Language::kThai:
      return Metric::kCer;
    default:
      return Metric::kWer;
  }
}

TokenMode mode_for(Language lang) {
  return metric_for(lang) == Metric::kCer ? TokenMode::kChar : TokenMode::kWord;
}

LanguageConfig::LanguageConfig() {
  const std::u32string default_punct = decode_utf8(kDefaultPunctuation);
  for (std::size_t i = 0; i < kNumLanguages; ++i) {
    const auto lang = static_cast<Language>(i);
    rules_[i].metric = metric_for(lang);
    rules_[i].mode = mode_for(lang);
    rules_[i].punctuation.insert(default_punct.begin(), default_punct.end());
  }
}

const LanguageConfig& LanguageConfig::defaults() {
  static const LanguageConfig kDefaults;
  return kDefaults;
}

LanguageConfig LanguageConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open language config file: " + file.string());

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("language config " + file.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw FormatError("language config " + file.string() + ": top-level value must be an object");
  }

  LanguageConfig config;
  for (const auto& [key, entry] : doc.items()) {
    const Language lang = parse_language_or_throw(key);
    if (!entry.is_object()) {
      throw FormatError("language config " + file.string() + ": entry \"" + key +
                        "\" must be an object");
    }
    for (const auto& [field, value] : entry.items()) {
      if (field == "metric") {
        const std::string v = value.get<std::string>();
        if (v == "wer") config.set_metric(lang, Metric::kWer);
        else if (v == "cer") config.set_metric(lang, Metric::kCer);
        else throw InputError("language config: metric must be \"wer\" or \"cer\", got \"" + v + "\"");
      } else if (field == "mode") {
        const std::string v = value.get<std::string>();
        if (v == "word") config.set_mode(lang, TokenMode::kWord);
        else if (v == "char") config.set_mode(lang, TokenMode::kChar);
        else throw InputError("language config: mode must be \"word\" or \"char\", got \"" + v + "\"");
      } else if (field == "punctuation") {
        config.set_punctuation(lang, value.get<std::string>());
      } else {
        throw InputError("language config: unknown field \"" + field + "\" in entry \"" + key + "\"");
      }
    }
  }
  return config;
}

Metric LanguageConfig::metric(Language lang) const {
  return rules_[static_cast<std::size_t>(lang)].metric;
}

TokenMode LanguageConfig::mode(Language lang) const {
  return rules_[static_cast<std::size_t>(lang)].mode;
}

bool LanguageConfig::is_punctuation(Language lang, char32_t cp) const {
  return rules_[static_cast<std::size_t>(lang)].punctuation.contains(cp);
}

void LanguageConfig::set_metric(Language lang, Metric metric) {
  rules_[static_cast<std::size_t>(lang)].metric = metric;
}

void LanguageConfig::set_mode(Language lang, TokenMode mode) {
  rules_[static_cast<std::size_t>(lang)].mode = mode;
}

void LanguageConfig::set_punctuation(Language lang, std::string_view chars) {
  const std::u32string cps = decode_utf8(chars);
  auto& set = rules_[static_cast<std::size_t>(lang)].punctuation;
  set.clear();
  set.insert(cps.begin(), cps.end());
}

}  // namespace asrkit
