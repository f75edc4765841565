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

#include "asrkit/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "asrkit/errors.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
};

// Raw-score ordering used while expanding; higher score first, ties toward
// the lexicographically smaller token sequence.
bool better_raw(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                      b.tokens.end());
}

double normalized_score(const Hypothesis& hyp, double length_penalty) {
  if (length_penalty == 0.0) return hyp.log_prob;
  const auto len = static_cast<double>(std::max<std::size_t>(1, hyp.tokens.size()));
  return hyp.log_prob / std::pow(len, length_penalty);
}

}  // namespace

std::vector<int> banned_tokens(std::span<const int> prefix, int n) {
  if (n < 1) throw InputError("banned_tokens: ngram order must be >= 1");
  const std::size_t len = prefix.size();
  const auto order = static_cast<std::size_t>(n);
  std::vector<int> banned;
  if (len + 1 < order) return banned;

  // A token t is banned iff the (n-1)-gram ending the prefix already occurs
  // somewhere in the prefix followed by t.
  const std::span<const int> tail = prefix.subspan(len - (order - 1));
  for (std::size_t i = 0; i + order <= len; ++i) {
    if (std::equal(tail.begin(), tail.end(), prefix.begin() + static_cast<std::ptrdiff_t>(i))) {
      banned.push_back(prefix[i + order - 1]);
    }
  }
  std::sort(banned.begin(), banned.end());
  banned.erase(std::unique(banned.begin(), banned.end()), banned.end());
  return banned;
}

DecodeResult beam_search(const std::string& context, const Scorer& scorer,
                         const DecodeConfig& cfg) {
  if (cfg.beam_width < 1) throw InputError("beam_search: beam_width must be >= 1");
  if (cfg.max_len < 1) throw InputError("beam_search: max_len must be >= 1");
  if (cfg.no_repeat_ngram < 0) throw InputError("beam_search: no_repeat_ngram must be >= 0");
  const int vocab = scorer.vocab_size();
  if (vocab < 1) throw ContractError("beam_search: scorer reports empty vocabulary");
  if (cfg.eos_id < 0 || cfg.eos_id >= vocab) {
    throw InputError("beam_search: eos_id outside the scorer vocabulary");
  }

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < cfg.max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(vocab));

    for (const Hypothesis& hyp : live) {
      std::vector<double> log_probs = scorer.score(hyp.tokens, context);
      if (log_probs.size() != static_cast<std::size_t>(vocab)) {
        throw ContractError("beam_search: scorer returned " + std::to_string(log_probs.size()) +
                            " log-probs for a vocabulary of " + std::to_string(vocab));
      }
      if (cfg.no_repeat_ngram > 0) {
        for (int t : banned_tokens(hyp.tokens, cfg.no_repeat_ngram)) {
          log_probs[static_cast<std::size_t>(t)] = kNegInf;
        }
      }

      bool any_viable = false;
      for (int t = 0; t < vocab; ++t) {
        const double lp = log_probs[static_cast<std::size_t>(t)];
        if (lp == kNegInf) continue;
        any_viable = true;
        if (t == cfg.eos_id) {
          finished.push_back(Hypothesis{hyp.tokens, hyp.log_prob + lp});
        } else {
          Hypothesis next;
          next.tokens = hyp.tokens;
          next.tokens.push_back(t);
          next.log_prob = hyp.log_prob + lp;
          candidates.push_back(std::move(next));
        }
      }
      if (!any_viable) {
        // Every continuation is blocked; the hypothesis competes as-is.
        finished.push_back(hyp);
      }
    }

    std::sort(candidates.begin(), candidates.end(), better_raw);
    if (candidates.size() > static_cast<std::size_t>(cfg.beam_width)) {
      candidates.resize(static_cast<std::size_t>(cfg.beam_width));
    }
    live = std::move(candidates);
  }

  // Survivors hit max_len without emitting eos.
  for (Hypothesis& hyp : live) finished.push_back(std::move(hyp));

  if (finished.empty()) {
    throw ContractError("beam_search: no hypothesis was finalized");
  }

  const Hypothesis* best = &finished.front();
  double best_score = normalized_score(*best, cfg.length_penalty);
  for (std::size_t i = 1; i < finished.size(); ++i) {
    const double score = normalized_score(finished[i], cfg.length_penalty);
    const bool wins =
        score > best_score ||
        (score == best_score &&
         std::lexicographical_compare(finished[i].tokens.begin(), finished[i].tokens.end(),
                                      best->tokens.begin(), best->tokens.end()));
    if (wins) {
      best = &finished[i];
      best_score = score;
    }
  }
  return DecodeResult{best->tokens, best->log_prob};
}

const PromptRegistry& PromptRegistry::builtin() {
  static const PromptRegistry kBuiltin = [] {
    PromptRegistry registry;
    for (Language lang : all_languages()) {
      if (std::string_view(to_string(lang)).starts_with("English")) {
        registry.set(lang, "Transcribe speech to text");
      } else {
        registry.set(lang, "<<placeholder: supply the " + std::string(to_string(lang)) +
                               " prompt meaning 'Transcribe speech to text'>>");
      }
    }
    return registry;
  }();
  return kBuiltin;
}

PromptRegistry PromptRegistry::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open prompt registry file: " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("prompt registry " + file.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw FormatError("prompt registry " + file.string() + ": top-level value must be an object");
  }
  PromptRegistry registry;
  for (const auto& [key, value] : doc.items()) {
    const Language lang = parse_language_or_throw(key);
    if (!value.is_string()) {
      throw FormatError("prompt registry " + file.string() + ": entry \"" + key +
                        "\" must be a string");
    }
    registry.set(lang, value.get<std::string>());
  }
  return registry;
}

const std::string& PromptRegistry::get(Language lang) const {
  const auto it = entries_.find(lang);
  if (it == entries_.end()) {
    throw InputError("prompt registry has no entry for language " +
                     std::string(to_string(lang)));
  }
  return it->second;
}

std::string get_prompt(Language lang, const PromptRegistry& registry) {
  return registry.get(lang);
}

TableScorer::TableScorer(int vocab_size, int eos_id) : vocab_size_(vocab_size), eos_id_(eos_id) {
  if (vocab_size < 1) throw InputError("TableScorer: vocab_size must be >= 1");
  if (eos_id < 0 || eos_id >= vocab_size) {
    throw InputError("TableScorer: eos_id outside the vocabulary");
  }
}

void TableScorer::add_row(const std::string& context, std::vector<int> suffix,
                          std::vector<double> log_probs) {
  if (log_probs.size() != static_cast<std::size_t>(vocab_size_)) {
    throw InputError("TableScorer: row for context \"" + context + "\" has " +
                     std::to_string(log_probs.size()) + " log-probs, expected " +
                     std::to_string(vocab_size_));
  }
  for (int t : suffix) {
    if (t < 0 || t >= vocab_size_) {
      throw InputError("TableScorer: suffix token " + std::to_string(t) +
                       " outside the vocabulary");
    }
  }
  auto& rows = contexts_[context];
  rows.push_back(Row{std::move(suffix), std::move(log_probs)});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.suffix.size() > b.suffix.size(); });
}

std::vector<double> TableScorer::score(std::span<const int> prefix,
                                       const std::string& context) const {
  const auto it = contexts_.find(context);
  if (it == contexts_.end()) {
    throw InputError("TableScorer: no rows for context \"" + context + "\"");
  }
  for (const Row& row : it->second) {
    if (row.suffix.size() > prefix.size()) continue;
    if (std::equal(row.suffix.begin(), row.suffix.end(),
                   prefix.end() - static_cast<std::ptrdiff_t>(row.suffix.size()))) {
      return row.log_probs;
    }
  }
  throw InputError("TableScorer: no row matches the current prefix for context \"" + context +
                   "\"; add a default row with an empty suffix");
}

TableScorer TableScorer::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open scorer file: " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("scorer file " + file.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("vocab_size") || !doc.contains("entries")) {
    throw FormatError("scorer file " + file.string() +
                      ": expected an object with \"vocab_size\" and \"entries\"");
  }
  TableScorer scorer(doc.at("vocab_size").get<int>(), doc.value("eos_id", 0));
  for (const auto& entry : doc.at("entries")) {
    scorer.add_row(entry.at("context").get<std::string>(),
                   entry.at("suffix").get<std::vector<int>>(),
                   entry.at("log_probs").get<std::vector<double>>());
  }
  return scorer;
}

}  // namespace asrkit
