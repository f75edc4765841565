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

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "asrkit/augment.hpp"
#include "asrkit/ckpt.hpp"
#include "asrkit/decode.hpp"
#include "asrkit/errors.hpp"
#include "asrkit/manifest.hpp"
#include "asrkit/metrics.hpp"
#include "asrkit/tensor_store.hpp"
#include "asrkit/textnorm.hpp"
#include "json.hpp"

namespace {

using namespace asrkit;

// Results go to --out or stdout; diagnostics go to stderr.
void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write output file: " + out_path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw InputError("write failed for output file: " + out_path);
}

LanguageConfig resolve_lang_config(const std::string& flag_path) {
  if (!flag_path.empty()) return LanguageConfig::load(flag_path);
  if (const char* env = std::getenv("MLC_ASR_KIT_LANG_CONFIG"); env != nullptr && *env != '\0') {
    return LanguageConfig::load(env);
  }
  return LanguageConfig::defaults();
}

std::string shortest_double(double value) { return nlohmann::json(value).dump(); }

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Runs fn(i) for i in [0, count) across up to `jobs` threads with deterministic
// slot assignment; the first exception (by thread index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
  const auto workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(jobs), count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& thread : threads) thread.join();
  for (const std::exception_ptr& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

struct ScoreArgs {
  std::string ref_path;
  std::string hyp_path;
  std::string lang_config;
  std::string out_path;
  std::string format = "tsv";
  int jobs = 1;
};

void run_score(const ScoreArgs& args) {
  const LanguageConfig config = resolve_lang_config(args.lang_config);
  const std::vector<ScoreFileLine> ref_lines = load_score_file(args.ref_path);
  const std::vector<ScoreFileLine> hyp_lines = load_score_file(args.hyp_path);

  std::map<std::string, const ScoreFileLine*> ref_by_id;
  std::map<std::string, const ScoreFileLine*> hyp_by_id;
  for (const auto& line : ref_lines) ref_by_id.emplace(line.utterance_id, &line);
  for (const auto& line : hyp_lines) hyp_by_id.emplace(line.utterance_id, &line);

  std::vector<std::string> unmatched;
  for (const auto& [id, line] : ref_by_id) {
    (void)line;
    if (!hyp_by_id.contains(id)) unmatched.push_back(id + " (reference only)");
  }
  for (const auto& [id, line] : hyp_by_id) {
    (void)line;
    if (!ref_by_id.contains(id)) unmatched.push_back(id + " (hypothesis only)");
  }
  if (!unmatched.empty()) {
    std::string message = "reference and hypothesis utterance ids do not match; " +
                          std::to_string(unmatched.size()) + " unmatched:";
    const std::size_t shown = std::min<std::size_t>(unmatched.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) message += "\n  " + unmatched[i];
    if (shown < unmatched.size()) {
      message += "\n  ... and " + std::to_string(unmatched.size() - shown) + " more";
    }
    throw InputError(message);
  }

  std::vector<std::pair<const ScoreFileLine*, const ScoreFileLine*>> pairs;
  pairs.reserve(ref_by_id.size());
  for (const auto& [id, ref] : ref_by_id) {
    const ScoreFileLine* hyp = hyp_by_id.at(id);
    if (ref->language != hyp->language) {
      throw InputError("utterance \"" + id + "\": reference language " +
                       std::string(to_string(ref->language)) + " but hypothesis language " +
                       std::string(to_string(hyp->language)));
    }
    pairs.emplace_back(ref, hyp);
  }

  std::vector<UtteranceScore> scores(pairs.size());
  parallel_for(pairs.size(), args.jobs, [&](std::size_t i) {
    const auto& [ref, hyp] = pairs[i];
    const Transcript ref_t = make_transcript(ref->text, ref->language, config);
    const Transcript hyp_t = make_transcript(hyp->text, hyp->language, config);
    scores[i] = score_utterance(ref_t, hyp_t);
  });

  const ScoreReport report = aggregate(scores);
  emit(args.format == "doc" ? report.to_json() : report.to_tsv(config), args.out_path);
}

struct HallucArgs {
  std::string hyp_path;
  std::string lang_config;
  std::string out_path;
  std::size_t n_min = 1;
  std::size_t n_max = 5;
  std::size_t min_repeats = 10;
};

void run_detect_halluc(const HallucArgs& args) {
  const LanguageConfig config = resolve_lang_config(args.lang_config);
  if (args.n_min < 1 || args.n_min > args.n_max) {
    throw InputError("detect-halluc: need 1 <= nmin <= nmax");
  }
  if (args.min_repeats < 2) throw InputError("detect-halluc: min-repeats must be >= 2");

  std::vector<ScoreFileLine> lines = load_score_file(args.hyp_path);
  std::sort(lines.begin(), lines.end(),
            [](const ScoreFileLine& a, const ScoreFileLine& b) {
              return a.utterance_id < b.utterance_id;
            });

  HallucinationParams params;
  params.n_min = args.n_min;
  params.n_max = args.n_max;
  params.min_repeats = args.min_repeats;

  std::string out;
  for (const ScoreFileLine& line : lines) {
    const Transcript transcript = make_transcript(line.text, line.language, config);
    for (const HallucinationFlag& flag : detect_hallucination(transcript.tokens, params)) {
      out += line.utterance_id;
      out += '\t';
      out += std::to_string(flag.span_start);
      out += '\t';
      out += std::to_string(flag.repeat_count);
      out += '\t';
      for (std::size_t i = 0; i < flag.ngram.size(); ++i) {
        if (i > 0) out += ' ';
        out += flag.ngram[i];
      }
      out += '\n';
    }
  }
  emit(out, args.out_path);
}

struct DecodeArgs {
  std::string scorer_path;
  std::string contexts_path;
  std::string out_path;
  int beam = 4;
  int no_repeat_ngram = 5;
  int max_len = 0;
  double length_penalty = 0.0;
};

void run_decode_sim(const DecodeArgs& args) {
  const TableScorer scorer = TableScorer::load(args.scorer_path);
  std::vector<std::string> contexts = read_lines(args.contexts_path);
  std::sort(contexts.begin(), contexts.end());

  DecodeConfig cfg;
  cfg.beam_width = args.beam;
  cfg.no_repeat_ngram = args.no_repeat_ngram;
  cfg.max_len = args.max_len;
  cfg.length_penalty = args.length_penalty;
  cfg.eos_id = scorer.eos_id();

  std::string out;
  char score_buf[64];
  for (const std::string& context : contexts) {
    const DecodeResult result = beam_search(context, scorer, cfg);
    std::snprintf(score_buf, sizeof(score_buf), "%.6f", result.log_prob);
    out += context;
    out += '\t';
    out += score_buf;
    out += '\t';
    for (std::size_t i = 0; i < result.tokens.size(); ++i) {
      if (i > 0) out += ' ';
      out += std::to_string(result.tokens[i]);
    }
    out += '\n';
  }
  emit(out, args.out_path);
}

struct AvgArgs {
  std::string out_path;
  std::string run_log;
  int last = 15;
  std::vector<std::string> files;
};

void run_avg(const AvgArgs& args) {
  std::vector<std::filesystem::path> inputs;
  if (!args.run_log.empty()) {
    if (!args.files.empty()) {
      throw InputError("avg: pass either --run-log or store files, not both");
    }
    const std::vector<CheckpointMeta> metas = load_run_log(args.run_log);
    const LastKSelection selection = select_last_k(metas, args.last);
    if (selection.underfull) {
      std::cerr << "warning: run log has only " << selection.selected.size()
                << " checkpoints, fewer than the requested " << args.last
                << "; averaging all of them\n";
    }
    // Relative checkpoint paths count from the run log's directory.
    const std::filesystem::path base = std::filesystem::path(args.run_log).parent_path();
    for (const CheckpointMeta& meta : selection.selected) {
      std::filesystem::path p(meta.path);
      inputs.push_back(p.is_absolute() ? p : base / p);
    }
  } else {
    if (args.files.empty()) {
      throw InputError("avg: need store files or --run-log");
    }
    inputs.assign(args.files.begin(), args.files.end());
  }
  average_files(inputs, args.out_path);
  std::cerr << "averaged " << inputs.size() << " stores into " << args.out_path << "\n";
}

struct SelectCkptArgs {
  std::string run_log;
  std::string out_path;
  std::int64_t tolerance = 2000;
  bool nonstrict = false;
};

void run_select_ckpt(const SelectCkptArgs& args) {
  const std::vector<CheckpointMeta> metas = load_run_log(args.run_log);
  const EarlyStopReplay replay = replay_early_stop(metas, args.tolerance, !args.nonstrict);
  std::string out;
  out += "stopped\t";
  out += replay.stopped ? "true" : "false";
  out += "\nstop_step\t" + std::to_string(replay.stop_step);
  out += "\nbest_step\t" + std::to_string(replay.best.step);
  out += "\nbest_acc\t" + shortest_double(replay.best.val_acc);
  out += "\nbest_path\t" + replay.best.path;
  out += '\n';
  emit(out, args.out_path);
}

struct AugmentArgs {
  std::string manifest_path;
  std::string policy_path;
  std::string out_dir;
  std::string out_path;
  std::optional<std::uint64_t> seed;
};

void run_augment(const AugmentArgs& args) {
  const std::vector<ManifestEntry> entries = load_manifest(args.manifest_path);
  AugmentPolicy policy;
  if (!args.policy_path.empty()) policy = load_policy(args.policy_path);
  if (args.seed) policy.seed = *args.seed;

  AugmentResult result = apply_policy(entries, policy, args.out_dir);
  for (const AugmentFailure& failure : result.failures) {
    std::cerr << "augment: " << failure.utterance_id << ": " << failure.message << "\n";
  }
  std::sort(result.entries.begin(), result.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.utterance_id < b.utterance_id;
            });
  emit(render_manifest(result.entries), args.out_path);
}

struct MergeArgs {
  std::string out_path;
  bool dedup = false;
  std::vector<std::string> files;
};

void run_manifest_merge(const MergeArgs& args) {
  std::vector<std::vector<ManifestEntry>> manifests;
  manifests.reserve(args.files.size());
  for (const std::string& file : args.files) manifests.push_back(load_manifest(file));
  const std::vector<ManifestEntry> merged = merge(manifests, args.dedup);
  emit(render_manifest(merged), args.out_path);
}

struct ReportArgs {
  std::string out_path;
  std::string format = "tsv";
  std::vector<std::string> files;
};

void run_manifest_report(const ReportArgs& args) {
  std::vector<ManifestEntry> entries;
  for (const std::string& file : args.files) {
    std::vector<ManifestEntry> loaded = load_manifest(file);
    entries.insert(entries.end(), std::make_move_iterator(loaded.begin()),
                   std::make_move_iterator(loaded.end()));
  }
  const DurationReport report = duration_report(entries);
  emit(args.format == "doc" ? report.to_json() : report.to_tsv(), args.out_path);
}

struct PromptArgs {
  std::string lang;
  std::string registry_path;
  std::string out_path;
};

void run_prompt(const PromptArgs& args) {
  const Language lang = parse_language_or_throw(args.lang);
  std::string prompt;
  if (args.registry_path.empty()) {
    prompt = get_prompt(lang, PromptRegistry::builtin());
  } else {
    prompt = get_prompt(lang, PromptRegistry::load(args.registry_path));
  }
  emit(prompt + "\n", args.out_path);
}

int run(int argc, char** argv) {
  CLI::App app{"Toolkit for multilingual conversational ASR evaluation, decoding simulation,\n"
               "checkpoint management, audio augmentation and corpus accounting."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mlc-asr-kit 0.1.0");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand(
      "score", "Score hypothesis text against references (WER/CER per language, MER overall)");
  score->add_option("--ref", score_args.ref_path, "Reference file (utterance_id<TAB>language<TAB>text)")
      ->required();
  score->add_option("--hyp", score_args.hyp_path, "Hypothesis file, same format")->required();
  score->add_option("--lang-config", score_args.lang_config,
                    "Language configuration JSON (default: $MLC_ASR_KIT_LANG_CONFIG or builtin)");
  score->add_option("--out", score_args.out_path, "Write the report here instead of stdout");
  score->add_option("--format", score_args.format, "Report format")
      ->check(CLI::IsMember({"tsv", "doc"}))
      ->capture_default_str();
  score->add_option("--jobs", score_args.jobs, "Worker thread limit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  score->callback([&] { run_score(score_args); });

  HallucArgs halluc_args;
  CLI::App* halluc = app.add_subcommand(
      "detect-halluc", "Flag contiguous n-gram repetitions in hypothesis text");
  halluc->add_option("--hyp", halluc_args.hyp_path, "Hypothesis file (utterance_id<TAB>language<TAB>text)")
      ->required();
  halluc->add_option("--nmin", halluc_args.n_min, "Smallest n-gram order")->capture_default_str();
  halluc->add_option("--nmax", halluc_args.n_max, "Largest n-gram order")->capture_default_str();
  halluc->add_option("--min-repeats", halluc_args.min_repeats, "Repeat threshold")
      ->capture_default_str();
  halluc->add_option("--lang-config", halluc_args.lang_config,
                     "Language configuration JSON (default: $MLC_ASR_KIT_LANG_CONFIG or builtin)");
  halluc->add_option("--out", halluc_args.out_path, "Write flags here instead of stdout");
  halluc->callback([&] { run_detect_halluc(halluc_args); });

  DecodeArgs decode_args;
  CLI::App* decode = app.add_subcommand(
      "decode-sim", "Beam-search decode each context against a table scorer");
  decode->add_option("--scorer", decode_args.scorer_path, "Table scorer JSON file")->required();
  decode->add_option("--contexts", decode_args.contexts_path, "File with one context per line")
      ->required();
  decode->add_option("--beam", decode_args.beam, "Beam width")->capture_default_str();
  decode->add_option("--no-repeat-ngram", decode_args.no_repeat_ngram,
                     "Blocked n-gram order (0 disables)")
      ->capture_default_str();
  decode->add_option("--max-len", decode_args.max_len, "Maximum generated length")->required();
  decode->add_option("--length-penalty", decode_args.length_penalty,
                     "Exponent for length-normalized final scores")
      ->capture_default_str();
  decode->add_option("--out", decode_args.out_path, "Write decodes here instead of stdout");
  decode->callback([&] { run_decode_sim(decode_args); });

  AvgArgs avg_args;
  CLI::App* avg = app.add_subcommand("avg", "Equal-weighted average of checkpoint tensor stores");
  avg->add_option("--out", avg_args.out_path, "Output store file")->required();
  avg->add_option("--run-log", avg_args.run_log,
                  "Run log (step<TAB>val_acc<TAB>path); relative paths count from its directory");
  avg->add_option("--last", avg_args.last, "How many latest checkpoints to average")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  avg->add_option("files", avg_args.files, "Store files to average");
  avg->callback([&] { run_avg(avg_args); });

  SelectCkptArgs select_args;
  CLI::App* select = app.add_subcommand(
      "select-ckpt", "Replay the early-stop rule over a run log");
  select->add_option("--run-log", select_args.run_log, "Run log (step<TAB>val_acc<TAB>path)")
      ->required();
  select->add_option("--tolerance", select_args.tolerance, "Patience in training steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  select->add_flag("--nonstrict", select_args.nonstrict,
                   "Treat equal validation accuracy as improvement");
  select->add_option("--out", select_args.out_path, "Write the result here instead of stdout");
  select->callback([&] { run_select_ckpt(select_args); });

  AugmentArgs augment_args;
  CLI::App* augment = app.add_subcommand(
      "augment", "Write speed and volume perturbed copies of manifest audio");
  augment->add_option("--manifest", augment_args.manifest_path, "Input manifest (JSON lines)")
      ->required();
  augment->add_option("--policy", augment_args.policy_path,
                      "Policy JSON (speed_factors, volume_range, seed); default 0.9x/1.1x speed, "
                      "0.15x-1.15x volume");
  augment->add_option("--seed", augment_args.seed, "Random seed (overrides the policy file)");
  augment->add_option("--out-dir", augment_args.out_dir, "Directory for perturbed wav files")
      ->required();
  augment->add_option("--out", augment_args.out_path,
                      "Write the augmented manifest here instead of stdout");
  augment->callback([&] { run_augment(augment_args); });

  MergeArgs merge_args;
  CLI::App* merge_cmd = app.add_subcommand(
      "manifest-merge", "Merge manifests with corpus-qualified utterance ids");
  merge_cmd->add_option("files", merge_args.files, "Manifest files")->required();
  merge_cmd->add_flag("--dedup", merge_args.dedup,
                      "Collapse entries with identical audio_path and text");
  merge_cmd->add_option("--out", merge_args.out_path,
                        "Write the merged manifest here instead of stdout");
  merge_cmd->callback([&] { run_manifest_merge(merge_args); });

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand(
      "manifest-report", "Hour totals per corpus and language");
  report->add_option("files", report_args.files, "Manifest files")->required();
  report->add_option("--format", report_args.format, "Report format")
      ->check(CLI::IsMember({"tsv", "doc"}))
      ->capture_default_str();
  report->add_option("--out", report_args.out_path, "Write the report here instead of stdout");
  report->callback([&] { run_manifest_report(report_args); });

  PromptArgs prompt_args;
  CLI::App* prompt = app.add_subcommand("prompt", "Print the decoding prompt for a language");
  prompt->add_option("--lang", prompt_args.lang, "Language tag (e.g. English-British, Japanese)")
      ->required();
  prompt->add_option("--registry", prompt_args.registry_path,
                     "Prompt registry JSON replacing the builtin prompts");
  prompt->add_option("--out", prompt_args.out_path, "Write the prompt here instead of stdout");
  prompt->callback([&] { run_prompt(prompt_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
