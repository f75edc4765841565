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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "asrkit/ckpt.hpp"
#include "asrkit/errors.hpp"
#include "testutil.hpp"

using namespace asrkit;

namespace {

std::vector<CheckpointMeta> run(std::int64_t first_step, std::int64_t stride, int count,
                                double first_acc, double acc_step) {
  std::vector<CheckpointMeta> metas;
  for (int i = 0; i < count; ++i) {
    CheckpointMeta meta;
    meta.step = first_step + stride * i;
    meta.val_acc = first_acc + acc_step * i;
    meta.path = "ckpt-" + std::to_string(meta.step) + ".st";
    metas.push_back(std::move(meta));
  }
  return metas;
}

}  // namespace

TEST_CASE("run logs parse step, accuracy and path") {
  const auto metas = parse_run_log("400\t0.81\tck/a.st\r\n"
                                   "\n"
                                   "800\t0.83\tck/b.st",
                                   "log");
  REQUIRE(metas.size() == 2);
  CHECK(metas[0] == CheckpointMeta{400, 0.81, "ck/a.st"});
  CHECK(metas[1] == CheckpointMeta{800, 0.83, "ck/b.st"});
  CHECK(parse_run_log("", "log").empty());
}

TEST_CASE("run logs reject malformed lines with their line number") {
  CHECK(testutil::throws_with<FormatError>(
      [] { parse_run_log("400\t0.8\ta.st\nbroken line\n", "log"); }, "log: line 2"));
  CHECK_THROWS_AS(parse_run_log("400\t0.8\ta.st\tsurplus\n", "log"), FormatError);
  CHECK_THROWS_AS(parse_run_log("-5\t0.8\ta.st\n", "log"), FormatError);
  CHECK_THROWS_AS(parse_run_log("400\t1.5\ta.st\n", "log"), FormatError);
  CHECK_THROWS_AS(parse_run_log("400\t0.8\t\n", "log"), FormatError);
  CHECK_THROWS_AS(parse_run_log("abc\t0.8\ta.st\n", "log"), FormatError);
}

TEST_CASE("run log steps are strictly increasing") {
  CHECK(testutil::throws_with<FormatError>(
      [] { parse_run_log("800\t0.8\ta.st\n400\t0.9\tb.st\n", "log"); }, "line 2"));
  CHECK_THROWS_AS(parse_run_log("400\t0.8\ta.st\n400\t0.9\tb.st\n", "log"), FormatError);
}

TEST_CASE("run logs load from disk") {
  const auto dir = testutil::scratch_dir("runlog");
  testutil::write_file(dir / "run.log", "100\t0.5\tfirst.st\n");
  const auto metas = load_run_log(dir / "run.log");
  REQUIRE(metas.size() == 1);
  CHECK(metas[0].path == "first.st");
  CHECK_THROWS_AS(load_run_log(dir / "missing.log"), InputError);
}

TEST_CASE("selecting the last 15 of 20 checkpoints spans steps 2400 to 8000") {
  const auto metas = run(400, 400, 20, 0.5, 0.01);
  const LastKSelection sel = select_last_k(metas, 15);
  REQUIRE(sel.selected.size() == 15);
  CHECK_FALSE(sel.underfull);
  CHECK(sel.selected.front().step == 2400);
  CHECK(sel.selected.back().step == 8000);
  for (std::size_t i = 1; i < sel.selected.size(); ++i) {
    CHECK(sel.selected[i].step > sel.selected[i - 1].step);
  }
}

TEST_CASE("selecting from an underfull run keeps everything and warns") {
  const auto metas = run(400, 400, 10, 0.5, 0.01);
  const LastKSelection sel = select_last_k(metas, 15);
  CHECK(sel.underfull);
  CHECK(sel.selected.size() == 10);
  CHECK(sel.selected.front().step == 400);
}

TEST_CASE("selecting one checkpoint returns the latest") {
  const auto metas = run(400, 400, 5, 0.5, 0.01);
  const LastKSelection sel = select_last_k(metas, 1);
  REQUIRE(sel.selected.size() == 1);
  CHECK(sel.selected[0].step == 2000);
  CHECK_FALSE(sel.underfull);
}

TEST_CASE("selection validates its inputs") {
  const auto metas = run(400, 400, 3, 0.5, 0.0);
  CHECK_THROWS_AS(select_last_k(metas, 0), InputError);
  CHECK_THROWS_AS(select_last_k(std::vector<CheckpointMeta>{}, 5), InputError);
  auto shuffled = metas;
  std::swap(shuffled[0], shuffled[2]);
  CHECK_THROWS_AS(select_last_k(shuffled, 2), InputError);
}

TEST_CASE("early stop fires exactly when patience runs out") {
  EarlyStopState state;
  state.tolerance = 2000;

  bool stop = false;
  std::tie(state, stop) = early_stop_update(state, 400, 0.90);
  CHECK_FALSE(stop);
  for (std::int64_t step = 800; step <= 2000; step += 400) {
    std::tie(state, stop) = early_stop_update(state, step, 0.85);
    CHECK_FALSE(stop);
  }
  std::tie(state, stop) = early_stop_update(state, 2400, 0.85);
  CHECK(stop);
  CHECK(state.best_step == 400);
}

TEST_CASE("steady improvement never stops") {
  EarlyStopState state;
  bool stop = false;
  for (std::int64_t step = 400; step <= 40000; step += 400) {
    std::tie(state, stop) = early_stop_update(state, step, static_cast<double>(step) / 100000.0);
    CHECK_FALSE(stop);
  }
  CHECK(state.best_step == 40000);
}

TEST_CASE("a tie with the best accuracy does not reset patience by default") {
  EarlyStopState state;
  state.tolerance = 800;
  bool stop = false;
  std::tie(state, stop) = early_stop_update(state, 400, 0.90);
  std::tie(state, stop) = early_stop_update(state, 800, 0.90);
  CHECK(state.best_step == 400);
  CHECK_FALSE(stop);
  std::tie(state, stop) = early_stop_update(state, 1200, 0.90);
  CHECK(stop);

  // With ties counted as improvement the window keeps sliding.
  EarlyStopState lax;
  lax.tolerance = 800;
  lax.strict_improvement = false;
  std::tie(lax, stop) = early_stop_update(lax, 400, 0.90);
  std::tie(lax, stop) = early_stop_update(lax, 800, 0.90);
  CHECK(lax.best_step == 800);
  std::tie(lax, stop) = early_stop_update(lax, 1200, 0.90);
  CHECK_FALSE(stop);
}

TEST_CASE("early stop updates validate their inputs") {
  EarlyStopState state;
  CHECK_THROWS_AS(early_stop_update(state, -1, 0.5), InputError);
  CHECK_THROWS_AS(early_stop_update(state, 400, 1.5), InputError);
  CHECK_THROWS_AS(early_stop_update(state, 400, -0.5), InputError);

  EarlyStopState bad_tol;
  bad_tol.tolerance = 0;
  CHECK_THROWS_AS(early_stop_update(bad_tol, 400, 0.5), InputError);

  bool stop = false;
  std::tie(state, stop) = early_stop_update(state, 400, 0.5);
  CHECK_THROWS_AS(early_stop_update(state, 400, 0.6), InputError);
  CHECK_THROWS_AS(early_stop_update(state, 300, 0.6), InputError);
}

TEST_CASE("replaying a stalled run stops exactly at best step plus tolerance") {
  std::vector<CheckpointMeta> metas = run(400, 400, 10, 0.85, -0.01);
  metas[0].val_acc = 0.90;  // best at step 400, no improvement after

  const EarlyStopReplay replay = replay_early_stop(metas, 2000);
  CHECK(replay.stopped);
  CHECK(replay.stop_step == 2400);
  CHECK(replay.best.step == 400);
  CHECK(replay.best.val_acc == 0.90);
  CHECK(replay.best.path == "ckpt-400.st");
}

TEST_CASE("replaying an improving run never stops") {
  const auto metas = run(400, 400, 20, 0.5, 0.01);
  const EarlyStopReplay replay = replay_early_stop(metas, 2000);
  CHECK_FALSE(replay.stopped);
  CHECK(replay.stop_step == -1);
  CHECK(replay.best.step == 8000);
}

TEST_CASE("replay reports the best checkpoint up to the stop point only") {
  // A late recovery after the stop must not leak into the result.
  std::vector<CheckpointMeta> metas = run(400, 400, 12, 0.80, 0.0);
  metas[0].val_acc = 0.88;
  metas[11].val_acc = 0.99;  // step 4800, after the rule already fired at 2400

  const EarlyStopReplay replay = replay_early_stop(metas, 2000);
  CHECK(replay.stopped);
  CHECK(replay.stop_step == 2400);
  CHECK(replay.best.step == 400);
  CHECK(replay.best.val_acc == 0.88);
}
