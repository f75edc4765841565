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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace asrkit {

struct CheckpointMeta {
  std::int64_t step = 0;
  double val_acc = 0.0;  // validation accuracy in [0, 1]
  std::string path;

  bool operator==(const CheckpointMeta&) const = default;
};

// Run-log format: one checkpoint per line, `step<TAB>val_acc<TAB>path`.
// Steps must be non-negative and strictly increasing; blank lines are
// skipped. Malformed lines raise FormatError naming the line number.
std::vector<CheckpointMeta> load_run_log(const std::filesystem::path& file);
std::vector<CheckpointMeta> parse_run_log(std::string_view text, const std::string& source);

struct LastKSelection {
  std::vector<CheckpointMeta> selected;  // ascending step order
  bool underfull = false;                // fewer than k checkpoints existed
};

// The k highest-step entries. An underfull log returns everything with the
// warning flag set rather than failing, so short runs stay averageable.
LastKSelection select_last_k(std::span<const CheckpointMeta> metas, int k);

struct EarlyStopState {
  std::int64_t best_step = -1;
  double best_acc = -std::numeric_limits<double>::infinity();
  std::int64_t tolerance = 2000;
  // Improvement means strictly greater accuracy by default; flip to treat
  // ties as improvement (which resets the patience window).
  bool strict_improvement = true;
  std::int64_t last_step = -1;

  bool operator==(const EarlyStopState&) const = default;
};

// Feeds one observation into the early-stop rule. The stop condition
// (step - best_step >= tolerance) is evaluated after the best-so-far update,
// so an improvement at the current step always yields should_stop = false.
// Steps must arrive in strictly increasing order.
std::pair<EarlyStopState, bool> early_stop_update(EarlyStopState state, std::int64_t step,
                                                  double val_acc);

struct EarlyStopReplay {
  bool stopped = false;
  std::int64_t stop_step = -1;  // step at which the rule fired; -1 if never
  CheckpointMeta best;          // best checkpoint seen up to the stop point
};

// Replays a finished run log through the early-stop rule, reporting where
// training would have stopped and which checkpoint was best at that point.
EarlyStopReplay replay_early_stop(std::span<const CheckpointMeta> metas, std::int64_t tolerance,
                                  bool strict_improvement = true);

}  // namespace asrkit
