/*
 * Copyright (c) the loopskill authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "../common/chain_gen.hpp"
#include "loopskill/clock.hpp"
#include "loopskill/errors.hpp"
#include "loopskill/replay.hpp"
#include "loopskill/skill.hpp"
#include "support.hpp"

using namespace loopskill;
using loopskill::testing::ChainGenerator;
using loopskill::testing::GeneratedChain;
using loopskill::testing::make_call;
using loopskill::testing::StubRunner;
using loopskill::testing::TempDir;

namespace {

ToolChain weather_chain() {
  ToolChain chain;
  chain.calls.push_back(make_call(1, ToolKind::Bash, {{"command", "date"}},
                                  "2025-06-01T08:30:00\n"));
  chain.calls.push_back(make_call(2, ToolKind::Bash, {{"command", "weather.py Beijing"}},
                                  "Beijing, sunny, 25C\n"));
  chain.calls.push_back(make_call(
      3, ToolKind::WriteFile,
      {{"path", "weather_log.txt"}, {"content", "2025-06-01T08:30:00 Beijing, sunny, 25C\n"}},
      "ok: wrote 39 bytes to weather_log.txt"));
  return chain;
}

LoopSkill weather_skill() {
  return compile_skill("loop_weather_abcd", weather_chain(), make_time(2025, 6, 1, 8, 30, 0));
}

}  // namespace

// ---------------------------------------------------------------------------
// Template resolution
// ---------------------------------------------------------------------------

TEST_CASE("resolve_template substitutes the four variables") {
  ReplayContext ctx;
  ctx.now = make_time(2025, 6, 2, 9, 0, 0);
  ctx.time_format = TimeFormat::IsoSecondsT;
  ctx.results[2] = "Beijing, rainy, 18C";
  ctx.prev_content = "old\n";

  CHECK(resolve_template("{{current_date}}", ctx) == "2025-06-02");
  CHECK(resolve_template("{{current_time}} {{step_2_result}}\n", ctx) ==
        "2025-06-02T09:00:00 Beijing, rainy, 18C\n");
  CHECK(resolve_template("{{prev_content}}tail", ctx) == "old\ntail");
  CHECK(resolve_template("plain text", ctx) == "plain text");
}

TEST_CASE("resolution honors the skill time format") {
  ReplayContext ctx;
  ctx.now = make_time(2025, 6, 2, 9, 0, 0);
  ctx.time_format = TimeFormat::IsoMinutesSpace;
  CHECK(resolve_template("{{current_time}}", ctx) == "2025-06-02 09:00");
  ctx.time_format = TimeFormat::IsoMinutesT;
  CHECK(resolve_template("{{current_time}}", ctx) == "2025-06-02T09:00");
  ctx.time_format = TimeFormat::IsoSecondsSpace;
  CHECK(resolve_template("{{current_time}}", ctx) == "2025-06-02 09:00:00");
}

TEST_CASE("an unbound step result is an unresolved-variable error") {
  ReplayContext ctx;
  ctx.now = make_time(2025, 6, 2);
  CHECK_THROWS_AS(resolve_template("{{step_9_result}}", ctx), UnresolvedVariableError);
  CHECK_THROWS_AS(resolve_template("{{prev_content}}", ctx), UnresolvedVariableError);
}

TEST_CASE("unknown tokens pass through verbatim") {
  ReplayContext ctx;
  ctx.now = make_time(2025, 6, 2);
  CHECK(resolve_template("{{mystery}} {{step_x_result}} {{", ctx) ==
        "{{mystery}} {{step_x_result}} {{");
}

// ---------------------------------------------------------------------------
// Replay execution
// ---------------------------------------------------------------------------

TEST_CASE("a clean replay executes every step and traces it") {
  LoopSkill skill = weather_skill();
  StubRunner runner([](ToolKind tool, const ArgMap&, int) -> std::string {
    if (tool == ToolKind::Bash) return "Beijing, rainy, 18C\n";
    return "ok: wrote 39 bytes to weather_log.txt";
  });
  FixedClock clock(make_time(2025, 6, 2, 9, 0, 0));
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  REQUIRE(outcome.ok());
  REQUIRE(outcome.trace.size() == 2);
  CHECK(outcome.trace[0].original_step == 2);
  CHECK(outcome.trace[0].resolved_args.at("command") == "weather.py Beijing");
  CHECK(outcome.trace[1].resolved_args.at("content") ==
        "2025-06-02T09:00:00 Beijing, rainy, 18C\n");
  CHECK(runner.call_count() == 2);
}

TEST_CASE("an in-band error halts the replay at that step") {
  LoopSkill skill = weather_skill();
  StubRunner runner([](ToolKind tool, const ArgMap&, int) -> std::string {
    if (tool == ToolKind::Bash) return "Error: connection refused";
    return "ok";
  });
  FixedClock clock(make_time(2025, 6, 2, 9, 0, 0));
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  CHECK(!outcome.ok());
  CHECK(outcome.kind == ReplayOutcome::Kind::StepFailure);
  CHECK(outcome.failed_step == 2);
  CHECK(outcome.failure_result == "Error: connection refused");
  CHECK(outcome.trace.size() == 1);
  CHECK(runner.call_count() == 1);
}

TEST_CASE("an unresolved variable halts without executing the step") {
  LoopSkill skill = weather_skill();
  // sabotage: reference a step that never runs
  skill.steps[1].args["content"] = "{{step_7_result}}\n";
  StubRunner runner([](ToolKind, const ArgMap&, int) { return std::string("fine\n"); });
  FixedClock clock(make_time(2025, 6, 2, 9, 0, 0));
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  CHECK(!outcome.ok());
  CHECK(outcome.failed_step == 3);
  CHECK(outcome.failure_result.rfind("Error: ", 0) == 0);
  CHECK(runner.call_count() == 1);  // only the bash step ran
}

TEST_CASE("prev_content rebinds to the most recent read during replay") {
  LoopSkill skill;
  skill.task_id = "loop_prev_aaaa";
  skill.time_format = TimeFormat::IsoSecondsT;
  skill.created_at = make_time(2025, 6, 1);
  skill.source_chain_digest = "0000000000000000";
  skill.steps.push_back({1, ToolKind::ReadFile, {{"path", "a.txt"}}});
  skill.steps.push_back({2, ToolKind::ReadFile, {{"path", "b.txt"}}});
  skill.steps.push_back({3, ToolKind::WriteFile, {{"path", "c.txt"}, {"content", "{{prev_content}}!"}}});

  StubRunner runner([](ToolKind tool, const ArgMap& args, int) -> std::string {
    if (tool == ToolKind::ReadFile) return "from " + args.at("path") + "\n";
    return "ok: wrote";
  });
  FixedClock clock(make_time(2025, 6, 2));
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  REQUIRE(outcome.ok());
  CHECK(outcome.trace[2].resolved_args.at("content") == "from b.txt\n!");
}

TEST_CASE("the clock is sampled once per replay") {
  LoopSkill skill;
  skill.task_id = "loop_once_aaaa";
  skill.time_format = TimeFormat::IsoSecondsT;
  skill.created_at = make_time(2025, 6, 1);
  skill.source_chain_digest = "0000000000000000";
  skill.steps.push_back({1, ToolKind::WriteFile, {{"path", "a"}, {"content", "{{current_time}}\n"}}});
  skill.steps.push_back({2, ToolKind::WriteFile, {{"path", "b"}, {"content", "{{current_time}}\n"}}});

  // a clock that drifts on every sample would desynchronize the two writes
  ManualClock clock(make_time(2025, 6, 2, 9, 0, 0));
  StubRunner runner([&](ToolKind, const ArgMap&, int) {
    clock.advance(std::chrono::seconds(90));
    return std::string("ok: wrote");
  });
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  REQUIRE(outcome.ok());
  CHECK(outcome.trace[0].resolved_args.at("content") == "2025-06-02T09:00:00\n");
  CHECK(outcome.trace[1].resolved_args.at("content") == "2025-06-02T09:00:00\n");
}

TEST_CASE("step results accumulate under their original step numbers") {
  // step numbers in the skill are sparse after date-step removal; later
  // templates must still address them by the original index
  ToolChain chain;
  chain.calls.push_back(make_call(1, ToolKind::Bash, {{"command", "date"}}, "2025-06-01\n"));
  chain.calls.push_back(make_call(2, ToolKind::Bash, {{"command", "first"}}, "value-one\n"));
  chain.calls.push_back(make_call(3, ToolKind::Bash, {{"command", "date"}}, "2025-06-01\n"));
  chain.calls.push_back(make_call(4, ToolKind::Bash, {{"command", "second"}}, "value-two\n"));
  chain.calls.push_back(make_call(
      5, ToolKind::WriteFile,
      {{"path", "out.txt"}, {"content", "value-one then value-two\n"}},
      "ok: wrote 25 bytes to out.txt"));
  LoopSkill skill = compile_skill("loop_sparse_aa", chain, make_time(2025, 6, 1));
  REQUIRE(skill.steps.size() == 3);
  CHECK(skill.steps[2].args.at("content") == "{{step_2_result}} then {{step_4_result}}\n");

  StubRunner runner([](ToolKind tool, const ArgMap& args, int) -> std::string {
    if (tool != ToolKind::Bash) return "ok: wrote";
    return args.at("command") == "first" ? "uno\n" : "dos\n";
  });
  FixedClock clock(make_time(2025, 6, 2));
  TempDir dir;
  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  REQUIRE(outcome.ok());
  CHECK(outcome.trace[2].resolved_args.at("content") == "uno then dos\n");
}

// ---------------------------------------------------------------------------
// Record/replay round trip
// ---------------------------------------------------------------------------

TEST_CASE("replaying with the recorded results reproduces the recorded bytes") {
  ToolChain chain = weather_chain();
  LoopSkill skill = compile_skill("loop_weather_abcd", chain, make_time(2025, 6, 1, 8, 30, 0));

  // stub every tool with the original recording's result for that step
  StubRunner runner([&](ToolKind tool, const ArgMap& args, int) -> std::string {
    for (const auto& call : chain.calls) {
      if (call.tool == tool && call.args == args) return call.result;
    }
    return "Error: unexpected call";
  });
  FixedClock clock(make_time(2025, 6, 1, 8, 30, 0));
  TempDir dir;

  ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
  REQUIRE(outcome.ok());
  CHECK(outcome.trace[1].resolved_args.at("content") ==
        chain.calls[2].args.at("content"));
}

TEST_CASE("sequential replays are independent and identical") {
  LoopSkill skill = weather_skill();
  StubRunner runner([](ToolKind tool, const ArgMap&, int) -> std::string {
    return tool == ToolKind::Bash ? "Beijing, rainy, 18C\n" : "ok: wrote";
  });
  FixedClock clock(make_time(2025, 6, 2, 9, 0, 0));
  TempDir dir;

  ReplayOutcome first = replay(skill, runner, dir.path(), clock);
  ReplayOutcome second = replay(skill, runner, dir.path(), clock);
  REQUIRE(first.ok());
  REQUIRE(second.ok());
  CHECK(first.trace == second.trace);
}

TEST_CASE("generated chains replay their own recordings byte-for-byte") {
  for (unsigned seed = 100; seed < 130; ++seed) {
    ChainGenerator gen(seed);
    GeneratedChain g = gen.generate();
    TimePoint recorded_at = parse_timestamp(g.date_literal + "T00:00:00");
    if (!g.timestamp_literal.empty()) {
      std::string ts = g.timestamp_literal;
      if (ts.size() == 10) ts += "T00:00:00";
      if (ts.size() == 16) ts += ":00";
      ts[10] = 'T';
      recorded_at = parse_timestamp(ts);
    }
    LoopSkill skill = compile_skill("loop_gen_bbbb", g.chain, recorded_at);

    StubRunner runner([&](ToolKind tool, const ArgMap& args, int) -> std::string {
      // answer with the recorded result for the step whose resolved args match
      for (const auto& call : g.chain.calls) {
        if (call.tool == tool && call.args == args) return call.result;
      }
      return "Error: unexpected call";
    });
    FixedClock clock(recorded_at);
    TempDir dir;
    ReplayOutcome outcome = replay(skill, runner, dir.path(), clock);
    REQUIRE(outcome.ok());
    for (const auto& trace : outcome.trace) {
      if (trace.tool != ToolKind::WriteFile) continue;
      const ToolCall* original = nullptr;
      for (const auto& call : g.chain.calls) {
        if (call.step == trace.original_step) original = &call;
      }
      REQUIRE(original != nullptr);
      CHECK(trace.resolved_args.at("content") == original->args.at("content"));
      CHECK(trace.resolved_args.at("path") == original->args.at("path"));
    }
  }
}
