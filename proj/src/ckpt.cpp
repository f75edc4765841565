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

#include "asrkit/ckpt.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>

#include "asrkit/errors.hpp"

namespace asrkit {

namespace {

std::string line_location(const std::string& source, std::size_t line_no) {
  return "run log " + source + ": line " + std::to_string(line_no) + ": ";
}

std::int64_t parse_step(std::string_view field, const std::string& source, std::size_t line_no) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw FormatError(line_location(source, line_no) + "step \"" + std::string(field) +
                      "\" is not an integer");
  }
  if (value < 0) {
    throw FormatError(line_location(source, line_no) + "step must be non-negative");
  }
  return value;
}

double parse_accuracy(std::string_view field, const std::string& source, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw FormatError(line_location(source, line_no) + "val_acc \"" + std::string(field) +
                      "\" is not a number");
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw FormatError(line_location(source, line_no) + "val_acc must lie in [0, 1]");
  }
  return value;
}

}  // namespace

std::vector<CheckpointMeta> parse_run_log(std::string_view text, const std::string& source) {
  std::vector<CheckpointMeta> metas;
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

    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = (tab1 == std::string_view::npos) ? std::string_view::npos
                                                              : line.find('\t', tab1 + 1);
    if (tab1 == std::string_view::npos || tab2 == std::string_view::npos ||
        line.find('\t', tab2 + 1) != std::string_view::npos) {
      throw FormatError(line_location(source, line_no) +
                        "expected three tab-separated fields (step, val_acc, path)");
    }
    CheckpointMeta meta;
    meta.step = parse_step(line.substr(0, tab1), source, line_no);
    meta.val_acc = parse_accuracy(line.substr(tab1 + 1, tab2 - tab1 - 1), source, line_no);
    meta.path = std::string(line.substr(tab2 + 1));
    if (meta.path.empty()) {
      throw FormatError(line_location(source, line_no) + "path field is empty");
    }
    if (!metas.empty() && meta.step <= metas.back().step) {
      throw FormatError(line_location(source, line_no) + "step " + std::to_string(meta.step) +
                        " does not increase over the previous step " +
                        std::to_string(metas.back().step));
    }
    metas.push_back(std::move(meta));
  }
  return metas;
}

std::vector<CheckpointMeta> load_run_log(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open run log: " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_log(buffer.str(), file.string());
}

LastKSelection select_last_k(std::span<const CheckpointMeta> metas, int k) {
  if (metas.empty()) throw InputError("select_last_k: the run log is empty");
  if (k < 1) throw InputError("select_last_k: k must be >= 1");
  for (std::size_t i = 1; i < metas.size(); ++i) {
    if (metas[i].step <= metas[i - 1].step) {
      throw InputError("select_last_k: run log steps are not strictly increasing");
    }
  }
  LastKSelection result;
  const auto want = static_cast<std::size_t>(k);
  const std::size_t take = std::min(want, metas.size());
  result.underfull = metas.size() < want;
  result.selected.assign(metas.end() - static_cast<std::ptrdiff_t>(take), metas.end());
  return result;
}

std::pair<EarlyStopState, bool> early_stop_update(EarlyStopState state, std::int64_t step,
                                                  double val_acc) {
  if (state.tolerance <= 0) throw InputError("early stop tolerance must be > 0");
  if (step < 0) throw InputError("early stop step must be non-negative");
  if (step <= state.last_step) {
    throw InputError("early stop steps must be strictly increasing: got " + std::to_string(step) +
                     " after " + std::to_string(state.last_step));
  }
  if (!(val_acc >= 0.0 && val_acc <= 1.0)) {
    throw InputError("early stop val_acc must lie in [0, 1]");
  }
  state.last_step = step;
  const bool improved =
      state.strict_improvement ? (val_acc > state.best_acc) : (val_acc >= state.best_acc);
  if (improved) {
    state.best_acc = val_acc;
    state.best_step = step;
  }
  const bool should_stop = step - state.best_step >= state.tolerance;
  return {state, should_stop};
}

EarlyStopReplay replay_early_stop(std::span<const CheckpointMeta> metas, std::int64_t tolerance,
                                  bool strict_improvement) {
  if (metas.empty()) throw InputError("early-stop replay: the run log is empty");
  EarlyStopState state;
  state.tolerance = tolerance;
  state.strict_improvement = strict_improvement;

  EarlyStopReplay replay;
  const CheckpointMeta* best = nullptr;
  for (const CheckpointMeta& meta : metas) {
    bool should_stop = false;
    const std::int64_t prev_best = state.best_step;
    std::tie(state, should_stop) = early_stop_update(state, meta.step, meta.val_acc);
    if (state.best_step != prev_best) best = &meta;
    if (should_stop) {
      replay.stopped = true;
      replay.stop_step = meta.step;
      break;
    }
  }
  if (best == nullptr) throw ContractError("early-stop replay tracked no best checkpoint");
  replay.best = *best;
  return replay;
}

}  // namespace asrkit
