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

#include <chrono>

#include "loopskill/errors.hpp"
#include "loopskill/planner.hpp"
#include "support.hpp"

using namespace loopskill;
using loopskill::testing::TempDir;

namespace {

PlannerScript weather_script() {
  PlannerScript script;
  script.entries["record the weather"] = {
      {ToolKind::Bash, {{"command", "date"}}},
      {ToolKind::Bash, {{"command", "echo 'Beijing, sunny, 25C'"}}},
      {ToolKind::WriteFile, {{"path", "weather_log.txt"}, {"content", "placeholder"}}},
  };
  return script;
}

LoopTask weather_task() {
  LoopTask task;
  task.id = "loop_weather_abcd";
  task.description = "record the weather";
  task.trigger = IntervalTrigger{IntervalSpec{30}};
  return task;
}

}  // namespace

TEST_CASE("scripted planner records its invocation list in order") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  ScriptedPlanner planner(weather_script());

  FirstExecOutcome outcome = run_first_execution(weather_task(), planner, recorder,
                                                 std::chrono::milliseconds(5000));
  REQUIRE(outcome.kind == FirstExecOutcome::Kind::Recorded);
  REQUIRE(outcome.chain.size() == 3);
  CHECK(outcome.chain.calls[0].tool == ToolKind::Bash);
  CHECK(outcome.chain.calls[1].result == "Beijing, sunny, 25C\n");
  CHECK(outcome.chain.calls[2].tool == ToolKind::WriteFile);
  CHECK(outcome.chain.calls[2].args.at("path") == "weather_log.txt");
  CHECK(planner.run_count() == 1);
}

TEST_CASE("unknown description is a planner error outcome") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  ScriptedPlanner planner(weather_script());
  LoopTask task = weather_task();
  task.description = "something unscripted";
  FirstExecOutcome outcome =
      run_first_execution(task, planner, recorder, std::chrono::milliseconds(5000));
  CHECK(outcome.kind == FirstExecOutcome::Kind::Exception);
}

TEST_CASE("scripted_plan lookup") {
  PlannerScript script = weather_script();
  CHECK(scripted_plan(script, "record the weather").size() == 3);
  CHECK_THROWS_AS(scripted_plan(script, "nope"), NotFoundError);
}

TEST_CASE("fault: raise exception") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  PlannerScript script = weather_script();
  script.fault = {PlannerFault::Kind::RaiseException, 0};
  ScriptedPlanner planner(script);
  FirstExecOutcome outcome = run_first_execution(weather_task(), planner, recorder,
                                                 std::chrono::milliseconds(5000));
  CHECK(outcome.kind == FirstExecOutcome::Kind::Exception);
  CHECK(!outcome.message.empty());
  CHECK(outcome.chain.empty());
}

TEST_CASE("fault: hang trips the deadline and discards the partial chain") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  PlannerScript script = weather_script();
  script.fault = {PlannerFault::Kind::Hang, 0};
  ScriptedPlanner planner(script);

  auto start = std::chrono::steady_clock::now();
  FirstExecOutcome outcome = run_first_execution(weather_task(), planner, recorder,
                                                 std::chrono::milliseconds(200));
  auto elapsed = std::chrono::steady_clock::now() - start;

  CHECK(outcome.kind == FirstExecOutcome::Kind::Timeout);
  CHECK(outcome.chain.empty());
  CHECK(elapsed >= std::chrono::milliseconds(200));
  CHECK(elapsed < std::chrono::seconds(5));
}

TEST_CASE("fault: injected error result at a chosen step") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  PlannerScript script = weather_script();
  script.fault = {PlannerFault::Kind::InjectErrorResultAt, 2};
  ScriptedPlanner planner(script);
  FirstExecOutcome outcome = run_first_execution(weather_task(), planner, recorder,
                                                 std::chrono::milliseconds(5000));
  REQUIRE(outcome.kind == FirstExecOutcome::Kind::Recorded);
  REQUIRE(outcome.chain.size() == 3);
  CHECK(outcome.chain.calls[1].result.find("Error:") != std::string::npos);
}

TEST_CASE("planner script json round-trip") {
  PlannerScript script = weather_script();
  script.fault = {PlannerFault::Kind::InjectErrorResultAt, 2};
  PlannerScript back = planner_script_from_json(planner_script_to_json(script));
  CHECK(back.entries == script.entries);
  CHECK(back.fault == script.fault);
}

TEST_CASE("counting planner wraps and counts") {
  TempDir dir;
  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  ScriptedPlanner inner(weather_script());
  CountingPlanner counting(inner);
  CHECK(counting.count() == 0);
  FirstExecOutcome outcome = run_first_execution(weather_task(), counting, recorder,
                                                 std::chrono::milliseconds(5000));
  CHECK(outcome.kind == FirstExecOutcome::Kind::Recorded);
  CHECK(counting.count() == 1);
}

TEST_CASE("live planner degrades instead of stalling") {
  TempDir dir;
  LivePlannerConfig config;
  config.endpoint = "https://example.invalid/v1";
  config.model = "m";
  config.api_key_env = "LOOP_TEST_MISSING_KEY";
  config.prompt_path = (dir.path() / "planner_prompt.txt").string();
  auto planner = make_live_planner(config);

  LocalToolRunner runner;
  Recorder recorder(runner, dir.path());
  FirstExecOutcome outcome = run_first_execution(weather_task(), *planner, recorder,
                                                 std::chrono::milliseconds(5000));
  CHECK(outcome.kind == FirstExecOutcome::Kind::Exception);
  CHECK(outcome.message.find("LOOP_TEST_MISSING_KEY") != std::string::npos);
}
