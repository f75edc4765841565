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

#include "asrkit/textnorm.hpp"

#include <memory>

#include <unicode/brkiter.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "asrkit/errors.hpp"

namespace asrkit {

namespace {

const icu::Normalizer2& nfc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || nfc == nullptr) {
    throw ContractError(std::string("ICU NFC instance unavailable: ") + u_errorName(status));
  }
  return *nfc;
}

// Grapheme cluster boundaries are locale-independent; one iterator per
// thread since BreakIterator itself is stateful.
icu::BreakIterator& grapheme_iterator() {
  thread_local std::unique_ptr<icu::BreakIterator> iter = [] {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> it(
        icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status) || !it) {
      throw ContractError(std::string("ICU BreakIterator unavailable: ") + u_errorName(status));
    }
    return it;
  }();
  return *iter;
}

icu::UnicodeString from_utf32(const std::u32string& cps) {
  return icu::UnicodeString::fromUTF32(reinterpret_cast<const UChar32*>(cps.data()),
                                       static_cast<int32_t>(cps.size()));
}

std::string to_utf8(const icu::UnicodeString& text) {
  std::string out;
  text.toUTF8String(out);
  return out;
}

std::u32string collapse_whitespace(const std::u32string& cps) {
  std::u32string out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (u_isUWhiteSpace(static_cast<UChar32>(cp))) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(U' ');
    pending_space = false;
    out.push_back(cp);
  }
  return out;
}

}  // namespace

std::u32string decode_utf8(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* bytes = reinterpret_cast<const unsigned char*>(utf8.data());
  const std::size_t n = utf8.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char b0 = bytes[i];
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len;
    char32_t cp;
    char32_t min_cp;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1Fu, min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0Fu, min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07u, min_cp = 0x10000;
    } else {
      throw FormatError("malformed UTF-8: invalid lead byte at offset " + std::to_string(i));
    }
    if (i + static_cast<std::size_t>(len) > n) {
      throw FormatError("malformed UTF-8: truncated sequence at offset " + std::to_string(i));
    }
    for (int k = 1; k < len; ++k) {
      const unsigned char bk = bytes[i + static_cast<std::size_t>(k)];
      if ((bk & 0xC0) != 0x80) {
        throw FormatError("malformed UTF-8: invalid continuation byte at offset " +
                          std::to_string(i + static_cast<std::size_t>(k)));
      }
      cp = (cp << 6) | (bk & 0x3Fu);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      throw FormatError("malformed UTF-8: invalid scalar value at offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string encode_utf8(std::u32string_view cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::string normalize(std::string_view raw, Language lang, const LanguageConfig& config) {
  std::u32string cps = decode_utf8(raw);

  // Punctuation becomes a space rather than vanishing: deleting characters
  // can merge adjacent words and can create new composition opportunities,
  // which would break idempotence after the NFC step below.
  for (char32_t& cp : cps) {
    if (config.is_punctuation(lang, cp)) cp = U' ';
  }

  icu::UnicodeString text = from_utf32(cps);
  if (config.mode(lang) == TokenMode::kWord) {
    text.foldCase(U_FOLD_CASE_DEFAULT);
  }

  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString composed = nfc_instance().normalize(text, status);
  if (U_FAILURE(status)) {
    throw ContractError(std::string("NFC normalization failed: ") + u_errorName(status));
  }

  return encode_utf8(collapse_whitespace(decode_utf8(to_utf8(composed))));
}

std::vector<std::string> grapheme_clusters(std::string_view utf8) {
  const icu::UnicodeString text = from_utf32(decode_utf8(utf8));
  icu::BreakIterator& iter = grapheme_iterator();
  iter.setText(text);

  std::vector<std::string> clusters;
  int32_t start = iter.first();
  for (int32_t end = iter.next(); end != icu::BreakIterator::DONE; start = end, end = iter.next()) {
    clusters.push_back(to_utf8(text.tempSubStringBetween(start, end)));
  }
  return clusters;
}

std::vector<std::string> tokenize(std::string_view normalized, Language lang,
                                  const LanguageConfig& config) {
  std::vector<std::string> tokens;
  if (normalized.empty()) return tokens;

  if (config.mode(lang) == TokenMode::kWord) {
    std::size_t begin = 0;
    while (begin <= normalized.size()) {
      const std::size_t end = normalized.find(' ', begin);
      const std::string_view piece = normalized.substr(
          begin, end == std::string_view::npos ? std::string_view::npos : end - begin);
      if (!piece.empty()) tokens.emplace_back(piece);
      if (end == std::string_view::npos) break;
      begin = end + 1;
    }
    return tokens;
  }

  for (std::string& cluster : grapheme_clusters(normalized)) {
    const std::u32string cps = decode_utf8(cluster);
    if (!cps.empty() && u_isUWhiteSpace(static_cast<UChar32>(cps.front()))) continue;
    tokens.push_back(std::move(cluster));
  }
  return tokens;
}

Transcript make_transcript(std::string_view raw, Language lang, const LanguageConfig& config) {
  Transcript t;
  t.raw = std::string(raw);
  t.normalized = normalize(raw, lang, config);
  t.tokens = tokenize(t.normalized, lang, config);
  t.language = lang;
  return t;
}

}  // namespace asrkit
