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

#include <string>
#include <string_view>
#include <vector>

#include "asrkit/language.hpp"

namespace asrkit {

// One utterance's text in raw, normalized and tokenized form. `tokens` is
// always derivable from `normalized` via tokenize(); word-mode tokens never
// contain whitespace, char-mode tokens are single extended grapheme clusters.
struct Transcript {
  std::string raw;
  std::string normalized;
  std::vector<std::string> tokens;
  Language language;
};

// Scoring-oriented text normalization, applied in this order:
//   1. punctuation characters (per-language configurable set) -> space
//   2. case folding (word-mode languages only)
//   3. Unicode NFC
//   4. whitespace runs -> single ASCII space, leading/trailing trimmed
// Idempotent: normalize(normalize(x)) == normalize(x).
// Malformed UTF-8 raises FormatError with the byte offset.
std::string normalize(std::string_view raw, Language lang,
                      const LanguageConfig& config = LanguageConfig::defaults());

// Splits normalized text into scoring units. Word mode splits on single
// spaces; char mode drops whitespace and yields one token per extended
// grapheme cluster. Empty input gives an empty sequence.
std::vector<std::string> tokenize(std::string_view normalized, Language lang,
                                  const LanguageConfig& config = LanguageConfig::defaults());

// normalize + tokenize in one step.
Transcript make_transcript(std::string_view raw, Language lang,
                           const LanguageConfig& config = LanguageConfig::defaults());

// Strict UTF-8 decode; throws FormatError with the byte offset of the first
// malformed sequence (overlong forms, surrogates and out-of-range values
// are rejected).
std::u32string decode_utf8(std::string_view utf8);

std::string encode_utf8(std::u32string_view cps);

// Extended grapheme cluster segmentation of valid UTF-8 text.
std::vector<std::string> grapheme_clusters(std::string_view utf8);

}  // namespace asrkit
