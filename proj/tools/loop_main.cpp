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

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "loopskill/clock.hpp"
#include "loopskill/cost_model.hpp"
#include "loopskill/errors.hpp"
#include "loopskill/planner.hpp"
#include "loopskill/replay.hpp"
#include "loopskill/scheduler.hpp"
#include "loopskill/skill.hpp"
#include "loopskill/store.hpp"
#include "loopskill/task.hpp"
#include "loopskill/tool_runtime.hpp"

namespace fs = std::filesystem;
using namespace loopskill;

namespace {

// Exit codes: 0 ok, 1 not found, 2 parse error, 3 validation failure,
// 4 runtime failure (I/O, corruption, timeouts).
constexpr int kOk = 0;
constexpr int kNotFound = 1;
constexpr int kParse = 2;
constexpr int kValidation = 3;
constexpr int kRuntime = 4;

volatile std::sig_atomic_t g_signal = 0;

void on_signal(int sig) { g_signal = sig; }

struct CliConfig {
  fs::path store_root;
  fs::path planner_script;  // empty selects the live planner
  long poll_seconds = 60;
  long deadline_seconds = 300;
  std::optional<unsigned> seed;  // fixes task-id suffixes for reproducible demos
};

HeartbeatStore open_store(const CliConfig& config) {
  fs::create_directories(config.store_root);
  return HeartbeatStore(StorePaths::under(config.store_root));
}

std::unique_ptr<Planner> make_planner(const CliConfig& config) {
  if (!config.planner_script.empty()) {
    return std::make_unique<ScriptedPlanner>(load_planner_script(config.planner_script));
  }
  return make_live_planner(LivePlannerConfig{});
}

SchedulerOptions scheduler_options(const CliConfig& config) {
  SchedulerOptions options;
  options.poll_interval = std::chrono::seconds(config.poll_seconds);
  options.first_exec_deadline = std::chrono::seconds(config.deadline_seconds);
  options.workdir_root = config.store_root / "work";
  return options;
}

SuffixSource suffix_source(const CliConfig& config) {
  return config.seed ? random_suffix_source(*config.seed) : random_suffix_source();
}

/// "@HH:MM" to minute-of-day; anything else is handed to parse_interval.
Trigger parse_trigger(const std::string& text) {
  if (!text.empty() && text[0] == '@') {
    int hour = 0;
    int minute = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "@%2d:%2d%c", &hour, &minute, &tail) != 2 || hour > 23 ||
        hour < 0 || minute > 59 || minute < 0 || text.size() != 6) {
      throw ParseError("expected @HH:MM, got: " + text);
    }
    return ScheduleTrigger{hour * 60 + minute};
  }
  return IntervalTrigger{parse_interval(text)};
}

std::string trigger_label(const Trigger& trigger) {
  if (is_interval(trigger)) {
    return "every " + std::to_string(std::get<IntervalTrigger>(trigger).every.minutes) + "m";
  }
  int minute = std::get<ScheduleTrigger>(trigger).at_minute;
  char buf[32];
  std::snprintf(buf, sizeof buf, "daily at %02d:%02d", minute / 60, minute % 60);
  return buf;
}

std::string describe_failures(const ValidationReport& report) {
  std::string out;
  for (const auto& failure : report.failures) {
    out += std::string(to_string(failure.rule));
    if (failure.step != 0) out += " step=" + std::to_string(failure.step);
    out += "\n";
  }
  return out;
}

int cmd_add(const CliConfig& config, const std::string& trigger_text,
            const std::vector<std::string>& description_words, const std::string& hours_text) {
  std::string description;
  for (const auto& word : description_words) {
    if (!description.empty()) description += ' ';
    description += word;
  }
  Trigger trigger = parse_trigger(trigger_text);

  std::optional<ActiveHours> hours;
  if (!hours_text.empty()) {
    int sh = 0, sm = 0, eh = 0, em = 0;
    char tail = 0;
    if (std::sscanf(hours_text.c_str(), "%2d:%2d-%2d:%2d%c", &sh, &sm, &eh, &em, &tail) != 4 ||
        hours_text.size() != 11) {
      throw ParseError("expected --hours HH:MM-HH:MM, got: " + hours_text);
    }
    hours = make_active_hours(sh * 60 + sm, eh * 60 + em);
  }

  HeartbeatStore store = open_store(config);
  HeartbeatConfig current = store.load_config();
  SuffixSource source = suffix_source(config);
  std::string id = derive_unique_task_id(description, source, [&](const std::string& candidate) {
    return current.tasks.count(candidate) > 0;
  });
  LoopTask task = create_task(description, trigger, hours, source);
  task.id = id;
  store.upsert_task(task);
  std::cout << id << "\n";
  return kOk;
}

int cmd_remove(const CliConfig& config, const std::string& id) {
  HeartbeatStore store = open_store(config);
  if (!store.remove_task(id)) {
    std::cerr << "not found: " << id << "\n";
    return kNotFound;
  }
  std::cout << "removed " << id << "\n";
  return kOk;
}

int cmd_list(const CliConfig& config) {
  HeartbeatStore store = open_store(config);
  HeartbeatConfig current = store.load_config();
  if (current.tasks.empty()) {
    std::cout << "no tasks\n";
    return kOk;
  }
  for (const auto& [id, task] : current.tasks) {
    std::cout << id << "  " << trigger_label(task.trigger) << "  "
              << (task.first_exec_pending ? "pending" : "ready") << "  "
              << (task.skill_ref ? "skill" : "no-skill") << "  "
              << (task.last_run ? format_timestamp(*task.last_run) : "-") << "  "
              << task.description << "\n";
  }
  return kOk;
}

int cmd_status(const CliConfig& config, const std::string& id) {
  HeartbeatStore store = open_store(config);
  std::optional<LoopTask> task = store.find_task(id);
  if (!task) {
    std::cerr << "not found: " << id << "\n";
    return kNotFound;
  }
  std::cout << "id: " << task->id << "\n"
            << "description: " << task->description << "\n"
            << "trigger: " << trigger_label(task->trigger) << "\n"
            << "enabled: " << (task->enabled ? "yes" : "no") << "\n"
            << "first_exec_pending: " << (task->first_exec_pending ? "yes" : "no") << "\n"
            << "last_run: " << (task->last_run ? format_timestamp(*task->last_run) : "-") << "\n";
  if (task->active_hours) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02d:%02d-%02d:%02d", task->active_hours->start_minute / 60,
                  task->active_hours->start_minute % 60, task->active_hours->end_minute / 60,
                  task->active_hours->end_minute % 60);
    std::cout << "active_hours: " << buf << "\n";
  }
  if (task->last_schedule_fire_date) {
    std::cout << "last_schedule_fire_date: " << *task->last_schedule_fire_date << "\n";
  }
  if (task->skill_ref) {
    std::cout << "skill_ref: " << *task->skill_ref << "\n";
    try {
      LoopSkill skill = load_skill(store.paths(), *task->skill_ref);
      std::cout << "skill_steps: " << skill.steps.size() << "\n"
                << "skill_created_at: " << format_timestamp(skill.created_at) << "\n";
    } catch (const Error& e) {
      std::cout << "skill_state: unloadable (" << e.what() << ")\n";
    }
  } else {
    std::cout << "skill_ref: -\n";
  }
  return kOk;
}

int cmd_tick(const CliConfig& config, const std::string& now_text) {
  HeartbeatStore store = open_store(config);
  LocalToolRunner runner;
  std::unique_ptr<Planner> planner = make_planner(config);
  SystemClock clock;
  Scheduler scheduler(store, runner, *planner, clock, scheduler_options(config), &std::cerr);

  TickReport report =
      now_text.empty() ? scheduler.tick() : scheduler.tick(parse_timestamp(now_text));
  scheduler.wait_for_first_execs();
  for (auto& event : scheduler.drain_events()) {
    report.events.push_back(std::move(event));
  }

  for (const auto& event : report.events) {
    std::cout << "event " << event.task_id << " " << to_string(event.scenario) << " "
              << event.action_taken << "\n";
  }
  for (const auto& decision : report.decisions) {
    std::cout << decision.task_id << " " << to_string(decision.action) << " "
              << (decision.action == TickAction::Skip ? to_string(decision.reason)
                                                      : std::string_view("due"))
              << "\n";
  }
  return kOk;
}

int cmd_run(const CliConfig& config, const std::string& id) {
  HeartbeatStore store = open_store(config);
  std::optional<LoopTask> task = store.find_task(id);
  if (!task) {
    std::cerr << "not found: " << id << "\n";
    return kNotFound;
  }
  LocalToolRunner runner;
  std::unique_ptr<Planner> planner = make_planner(config);
  fs::path workdir = config.store_root / "work" / id;
  fs::create_directories(workdir);
  Recorder recorder(runner, workdir);
  SystemClock clock;
  TimePoint now = clock.now();

  FirstExecOutcome outcome = run_first_execution(
      *task, *planner, recorder, std::chrono::seconds(config.deadline_seconds));
  if (outcome.kind == FirstExecOutcome::Kind::Timeout) {
    std::cerr << "first execution timed out\n";
    return kRuntime;
  }
  if (outcome.kind == FirstExecOutcome::Kind::Exception) {
    std::cerr << "planner failed: " << outcome.message << "\n";
    return kRuntime;
  }

  ValidationReport report = validate_chain(outcome.chain);
  if (!report.valid) {
    store.with_task(id, [&](LoopTask& t) {
      t.first_exec_pending = false;
      t.last_run = now;
      if (is_schedule(t.trigger)) t.last_schedule_fire_date = format_date(now);
    });
    std::cout << describe_failures(report);
    std::cerr << "recording rejected; task will use the planner fallback\n";
    return kValidation;
  }

  LoopSkill skill = compile_skill(id, outcome.chain, now);
  std::string ref = save_skill(skill, store.paths());
  store.with_task(id, [&](LoopTask& t) {
    t.first_exec_pending = false;
    t.skill_ref = ref;
    t.last_run = now;
    if (is_schedule(t.trigger)) t.last_schedule_fire_date = format_date(now);
  });
  std::cout << "recorded " << outcome.chain.calls.size() << " steps, compiled "
            << skill.steps.size() << " into " << ref << "\n";
  return kOk;
}

int cmd_replay(const CliConfig& config, const std::string& id, const std::string& now_text) {
  HeartbeatStore store = open_store(config);
  std::optional<LoopTask> task = store.find_task(id);
  if (!task) {
    std::cerr << "not found: " << id << "\n";
    return kNotFound;
  }
  if (!task->skill_ref) {
    std::cerr << "no skill compiled for " << id << "\n";
    return kNotFound;
  }
  LoopSkill skill = load_skill(store.paths(), *task->skill_ref);
  LocalToolRunner runner;
  fs::path workdir = config.store_root / "work" / id;
  fs::create_directories(workdir);
  TimePoint now = now_text.empty() ? SystemClock().now() : parse_timestamp(now_text);
  FixedClock clock(now);

  ReplayOutcome outcome = replay(skill, runner, workdir, clock);
  for (const auto& trace : outcome.trace) {
    std::cout << "step " << trace.original_step << " " << to_string(trace.tool) << ": "
              << (trace.result.rfind("Error: ", 0) == 0 ? trace.result : "ok") << "\n";
  }
  if (!outcome.ok()) {
    std::cerr << "replay failed at step " << outcome.failed_step << ": " << outcome.failure_result
              << "\n";
    return kRuntime;
  }
  store.mark_run(id, now);
  std::cout << "replayed " << skill.steps.size() << " steps\n";
  return kOk;
}

int cmd_recompile(const CliConfig& config, const std::string& id) {
  HeartbeatStore store = open_store(config);
  if (!store.find_task(id)) {
    std::cerr << "not found: " << id << "\n";
    return kNotFound;
  }
  store.with_task(id, [](LoopTask& t) {
    t.first_exec_pending = true;
    t.skill_ref.reset();
  });
  std::cout << "queued re-record for " << id << "\n";
  return kOk;
}

int cmd_compile(const CliConfig& config, const std::string& chain_file, const std::string& task_id,
                bool save) {
  std::optional<std::string> bytes = read_file_if_exists(chain_file);
  if (!bytes) {
    std::cerr << "not found: " << chain_file << "\n";
    return kNotFound;
  }
  ToolChain chain = deserialize_chain(*bytes);
  ValidationReport report = validate_chain(chain);
  if (!report.valid) {
    std::cout << describe_failures(report);
    return kValidation;
  }
  std::string id = task_id.empty() ? "loop_offline_tmpl" : task_id;
  LoopSkill skill = compile_skill(id, chain, SystemClock().now());
  if (save) {
    if (task_id.empty()) throw ParseError("--save requires --task");
    HeartbeatStore store = open_store(config);
    if (!store.find_task(task_id)) {
      std::cerr << "not found: " << task_id << "\n";
      return kNotFound;
    }
    std::string ref = save_skill(skill, store.paths());
    store.attach_skill(task_id, ref);
    std::cout << "saved " << ref << "\n";
  } else {
    std::cout << serialize_skill(skill);
  }
  return kOk;
}

int cmd_cost(bool as_json) {
  std::vector<CostTableRow> rows = monthly_cost_table();
  if (as_json) {
    std::cout << cost_table_json(rows).dump(2) << "\n";
  } else {
    std::cout << format_cost_table(rows);
  }
  return kOk;
}

int cmd_daemon(const CliConfig& config) {
  HeartbeatStore store = open_store(config);
  LocalToolRunner runner;
  std::unique_ptr<Planner> planner = make_planner(config);
  SystemClock clock;
  Scheduler scheduler(store, runner, *planner, clock, scheduler_options(config), &std::cerr);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  ShutdownSignal shutdown;
  std::thread watcher([&shutdown] {
    while (!shutdown.requested()) {
      if (g_signal != 0) {
        shutdown.request();
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });

  std::cerr << "daemon started, polling every " << config.poll_seconds << "s\n";
  scheduler.startup_sweep();
  scheduler.run_daemon(shutdown);
  shutdown.request();  // stop the watcher if the loop ended another way
  watcher.join();
  std::cerr << "daemon stopped\n";
  return kOk;
}

int cmd_reset_config(const CliConfig& config, bool yes) {
  if (!yes) throw ParseError("reset-config is destructive; pass --yes to confirm");
  HeartbeatStore store = open_store(config);
  store.save_config(HeartbeatConfig{});
  std::cerr << "config reset; skill files under " << store.paths().skills_dir
            << " were left in place\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loop: record a task once, then replay it deterministically on schedule"};
  app.require_subcommand(1);

  CliConfig config;
  config.store_root = fs::path(std::getenv("HOME") ? std::getenv("HOME") : ".") / ".loopskill";
  app.add_option("--store-root", config.store_root, "state directory (config + skills)")
      ->envname("LOOP_STORE_ROOT");
  app.add_option("--planner-script", config.planner_script,
                 "scripted planner JSON; omit to use the live planner");
  app.add_option("--poll-interval", config.poll_seconds, "daemon poll interval, seconds");
  app.add_option("--deadline", config.deadline_seconds, "first-execution deadline, seconds");
  unsigned seed_value = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_value, "fix the task-id suffix source (for demos)");

  auto* add = app.add_subcommand("add", "create a task: add <30m|2h|@HH:MM> <description>");
  std::string trigger_text;
  std::vector<std::string> description_words;
  std::string hours_text;
  add->add_option("trigger", trigger_text, "interval (30m, 2h, 1d) or schedule (@HH:MM)")
      ->required();
  add->add_option("description", description_words, "what the task does")->required();
  add->add_option("--hours", hours_text, "active hours window HH:MM-HH:MM");

  auto* remove = app.add_subcommand("remove", "delete a task and its skill directory");
  std::string id;
  remove->add_option("id", id, "task id")->required();

  app.add_subcommand("list", "list all tasks");

  auto* status = app.add_subcommand("status", "show one task in detail");
  status->add_option("id", id, "task id")->required();

  auto* tick = app.add_subcommand("tick", "run one scheduler pass");
  std::string now_text;
  tick->add_option("--now", now_text, "decide as of this instant (YYYY-MM-DDTHH:MM:SSZ)");

  auto* run = app.add_subcommand("run", "force a first execution (record + compile) now");
  run->add_option("id", id, "task id")->required();

  auto* replay_cmd = app.add_subcommand("replay", "force a skill replay now");
  replay_cmd->add_option("id", id, "task id")->required();
  replay_cmd->add_option("--now", now_text, "replay as of this instant");

  auto* recompile = app.add_subcommand("recompile", "drop the skill and queue a fresh recording");
  recompile->add_option("id", id, "task id")->required();

  auto* compile_cmd =
      app.add_subcommand("compile", "validate and compile a recorded chain file offline");
  std::string chain_file;
  std::string compile_task;
  bool compile_save = false;
  compile_cmd->add_option("chain", chain_file, "tool-chain JSON file")->required();
  compile_cmd->add_option("--task", compile_task, "compile under this task id");
  compile_cmd->add_flag("--save", compile_save, "persist the skill and attach it to --task");

  auto* cost = app.add_subcommand("cost", "print the monthly planner-cost table");
  bool cost_json = false;
  cost->add_flag("--json", cost_json, "machine-readable output");

  app.add_subcommand("daemon", "poll and execute tasks until SIGINT/SIGTERM");

  auto* reset = app.add_subcommand("reset-config", "replace a corrupt config with an empty one");
  bool reset_yes = false;
  reset->add_flag("--yes", reset_yes, "confirm the reset");

  // allow the global options to appear after the subcommand as well
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }
  if (seed_opt->count() > 0) config.seed = seed_value;

  try {
    if (app.got_subcommand(add)) return cmd_add(config, trigger_text, description_words, hours_text);
    if (app.got_subcommand(remove)) return cmd_remove(config, id);
    if (app.got_subcommand("list")) return cmd_list(config);
    if (app.got_subcommand(status)) return cmd_status(config, id);
    if (app.got_subcommand(tick)) return cmd_tick(config, now_text);
    if (app.got_subcommand(run)) return cmd_run(config, id);
    if (app.got_subcommand(replay_cmd)) return cmd_replay(config, id, now_text);
    if (app.got_subcommand(recompile)) return cmd_recompile(config, id);
    if (app.got_subcommand(compile_cmd))
      return cmd_compile(config, chain_file, compile_task, compile_save);
    if (app.got_subcommand(cost)) return cmd_cost(cost_json);
    if (app.got_subcommand("daemon")) return cmd_daemon(config);
    if (app.got_subcommand(reset)) return cmd_reset_config(config, reset_yes);
    std::cerr << "no subcommand\n";
    return kParse;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const NotFoundError& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return kNotFound;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
