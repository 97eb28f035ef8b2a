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

#include "loopskill/scheduler.hpp"

#include <cstdlib>
#include <exception>
#include <utility>

#include "loopskill/errors.hpp"
#include "loopskill/replay.hpp"

namespace loopskill {

namespace fs = std::filesystem;

std::string_view to_string(TickAction action) {
  switch (action) {
    case TickAction::StartFirstExec:
      return "start_first_exec";
    case TickAction::Replay:
      return "replay";
    case TickAction::PlannerFallback:
      return "planner_fallback";
    case TickAction::Skip:
      return "skip";
  }
  return "unknown";
}

std::string_view to_string(SkipReason reason) {
  switch (reason) {
    case SkipReason::None:
      return "-";
    case SkipReason::NotDue:
      return "not_due";
    case SkipReason::OutsideActiveHours:
      return "outside_active_hours";
    case SkipReason::AlreadyRanToday:
      return "already_ran_today";
    case SkipReason::PendingInFlight:
      return "pending_in_flight";
    case SkipReason::Disabled:
      return "disabled";
  }
  return "unknown";
}

std::string_view to_string(DegradationScenario scenario) {
  switch (scenario) {
    case DegradationScenario::EmptyChain:
      return "empty_chain";
    case DegradationScenario::ContainsEditFile:
      return "contains_edit_file";
    case DegradationScenario::ErrorKeyword:
      return "error_keyword";
    case DegradationScenario::NoWriteFile:
      return "no_write_file";
    case DegradationScenario::FirstExecTimeout:
      return "first_exec_timeout";
    case DegradationScenario::FirstExecException:
      return "first_exec_exception";
    case DegradationScenario::ReplayStepFailure:
      return "replay_step_failure";
    case DegradationScenario::UserRemove:
      return "user_remove";
  }
  return "unknown";
}

DegradationScenario scenario_for(const PsiFailure& failure) {
  switch (failure.rule) {
    case PsiRule::EmptyChain:
      return DegradationScenario::EmptyChain;
    case PsiRule::ContainsEditFile:
      return DegradationScenario::ContainsEditFile;
    case PsiRule::ErrorKeywordInResult:
      return DegradationScenario::ErrorKeyword;
    case PsiRule::NoWriteFile:
      return DegradationScenario::NoWriteFile;
  }
  return DegradationScenario::EmptyChain;
}

// ---------------------------------------------------------------------------
// Trigger predicates
// ---------------------------------------------------------------------------

bool is_due_interval(const LoopTask& task, TimePoint now) {
  const auto& trigger = std::get<IntervalTrigger>(task.trigger);
  if (!task.last_run) return true;
  return now - *task.last_run >= std::chrono::minutes(trigger.every.minutes);
}

bool is_due_schedule(const LoopTask& task, TimePoint now) {
  const auto& trigger = std::get<ScheduleTrigger>(task.trigger);
  int m = minute_of_day(now);
  if (std::abs(m - trigger.at_minute) > 5) return false;
  return !task.last_schedule_fire_date || *task.last_schedule_fire_date != format_date(now);
}

bool in_active_hours(const std::optional<ActiveHours>& hours, TimePoint now) {
  if (!hours) return true;
  int m = minute_of_day(now);
  if (hours->start_minute < hours->end_minute) {
    return hours->start_minute <= m && m < hours->end_minute;
  }
  return m >= hours->start_minute || m < hours->end_minute;
}

TickDecision decide(const LoopTask& task, TimePoint now, const std::set<std::string>& in_flight,
                    bool skill_loads) {
  TickDecision d;
  d.task_id = task.id;
  d.action = TickAction::Skip;

  if (!task.enabled) {
    d.reason = SkipReason::Disabled;
    return d;
  }
  if (!in_active_hours(task.active_hours, now)) {
    d.reason = SkipReason::OutsideActiveHours;
    return d;
  }
  if (in_flight.count(task.id)) {
    d.reason = SkipReason::PendingInFlight;
    return d;
  }
  if (is_interval(task.trigger)) {
    if (!is_due_interval(task, now)) {
      d.reason = SkipReason::NotDue;
      return d;
    }
  } else {
    if (!is_due_schedule(task, now)) {
      int m = minute_of_day(now);
      bool in_window = std::abs(m - std::get<ScheduleTrigger>(task.trigger).at_minute) <= 5;
      d.reason = in_window ? SkipReason::AlreadyRanToday : SkipReason::NotDue;
      return d;
    }
  }
  if (task.first_exec_pending) {
    d.action = TickAction::StartFirstExec;
    return d;
  }
  if (task.skill_ref && skill_loads) {
    d.action = TickAction::Replay;
    return d;
  }
  d.action = TickAction::PlannerFallback;
  return d;
}

// ---------------------------------------------------------------------------
// Scheduler
// ---------------------------------------------------------------------------

Scheduler::Scheduler(HeartbeatStore& store, ToolRunner& runner, Planner& planner,
                     const Clock& clock, SchedulerOptions options, std::ostream* log)
    : store_(store),
      runner_(runner),
      planner_(planner),
      clock_(clock),
      options_(std::move(options)),
      log_(log) {
  if (options_.workdir_root.empty()) {
    options_.workdir_root = fs::temp_directory_path() / "loopskill-work";
  }
}

Scheduler::~Scheduler() { wait_for_first_execs(); }

void Scheduler::set_tick_observer(std::function<void(int)> observer) {
  tick_observer_ = std::move(observer);
}

void Scheduler::log_line(std::string_view level, const std::string& task_id,
                         std::string_view action, std::string_view reason) {
  if (!log_) return;
  std::lock_guard lock(mutex_);
  *log_ << format_timestamp(clock_.now()) << ' ' << level << ' ' << task_id << ' ' << action << ' '
        << reason << '\n';
}

void Scheduler::push_event(DegradationEvent event) {
  std::lock_guard lock(mutex_);
  pending_events_.push_back(std::move(event));
}

std::vector<DegradationEvent> Scheduler::drain_events() {
  std::vector<DegradationEvent> events;
  {
    std::lock_guard lock(mutex_);
    events = std::move(pending_events_);
    pending_events_.clear();
  }
  for (const auto& event : events) {
    log_line("WARN", event.task_id, to_string(event.scenario), event.action_taken);
  }
  return events;
}

fs::path Scheduler::workdir_for(const std::string& task_id) const {
  return options_.workdir_root / task_id;
}

bool Scheduler::skill_loadable(const LoopTask& task) const {
  if (!task.skill_ref) return false;
  try {
    load_skill(store_.paths(), *task.skill_ref);
    return true;
  } catch (const Error&) {
    return false;
  }
}

TickReport Scheduler::tick() { return tick(clock_.now()); }

TickReport Scheduler::tick(TimePoint now) {
  TickReport report;
  std::set<std::string> in_flight_snapshot;
  {
    std::lock_guard lock(mutex_);
    report.events = std::move(pending_events_);
    pending_events_.clear();
    in_flight_snapshot = in_flight_;
  }
  for (const auto& event : report.events) {
    log_line("WARN", event.task_id, to_string(event.scenario), event.action_taken);
  }

  HeartbeatConfig config = store_.load_config();
  for (const auto& [id, task] : config.tasks) {
    bool loads = !task.first_exec_pending && task.skill_ref && skill_loadable(task);
    TickDecision decision = decide(task, now, in_flight_snapshot, loads);
    report.decisions.push_back(decision);
    log_line("INFO", id, to_string(decision.action),
             decision.action == TickAction::Skip ? to_string(decision.reason) : "due");
    try {
      execute_decision(decision, task, now, report);
    } catch (const std::exception& e) {
      log_line("ERROR", id, "tick_error", e.what());
    }
  }
  return report;
}

void Scheduler::execute_decision(const TickDecision& decision, const LoopTask& task, TimePoint now,
                                 TickReport& report) {
  switch (decision.action) {
    case TickAction::Skip:
      return;
    case TickAction::StartFirstExec:
      start_first_execution(task, now);
      return;
    case TickAction::Replay:
      run_replay(task, now, report);
      return;
    case TickAction::PlannerFallback:
      run_fallback(task, now);
      return;
  }
}

void Scheduler::start_first_execution(const LoopTask& task, TimePoint now) {
  fs::create_directories(workdir_for(task.id));
  {
    std::lock_guard lock(mutex_);
    if (in_flight_.count(task.id)) return;
    in_flight_.insert(task.id);
    ++active_workers_;
  }
  LoopTask snapshot = task;
  std::lock_guard lock(mutex_);
  workers_.emplace_back([this, snapshot = std::move(snapshot), now] {
    Recorder recorder(runner_, workdir_for(snapshot.id));
    FirstExecOutcome outcome =
        run_first_execution(snapshot, planner_, recorder, options_.first_exec_deadline);
    try {
      complete_first_execution(snapshot.id, outcome, now);
    } catch (const std::exception& e) {
      log_line("ERROR", snapshot.id, "first_exec_store_error", e.what());
    }
    {
      std::lock_guard lk(mutex_);
      in_flight_.erase(snapshot.id);
      --active_workers_;
    }
    idle_cv_.notify_all();
  });
}

void Scheduler::complete_first_execution(const std::string& task_id,
                                         const FirstExecOutcome& outcome, TimePoint now) {
  switch (outcome.kind) {
    case FirstExecOutcome::Kind::Timeout:
      push_event({task_id, DegradationScenario::FirstExecTimeout, "cleared_pending_llm_fallback"});
      store_.set_pending(task_id, false);
      return;
    case FirstExecOutcome::Kind::Exception:
      push_event(
          {task_id, DegradationScenario::FirstExecException, "cleared_pending_llm_fallback"});
      store_.set_pending(task_id, false);
      return;
    case FirstExecOutcome::Kind::Recorded:
      break;
  }

  ValidationReport report = validate_chain(outcome.chain);
  if (!report.valid) {
    push_event(
        {task_id, scenario_for(report.failures.front()), "cleared_pending_llm_fallback"});
    store_.with_task(task_id, [&](LoopTask& t) {
      t.first_exec_pending = false;
      t.last_run = now;
      if (is_schedule(t.trigger)) t.last_schedule_fire_date = format_date(now);
    });
    return;
  }

  std::string skill_ref;
  try {
    LoopSkill skill = compile_skill(task_id, outcome.chain, now);
    skill_ref = save_skill(skill, store_.paths());
  } catch (const Error& e) {
    // Valid recording that would not compile: fall back rather than stall.
    log_line("ERROR", task_id, "compile_failed", e.what());
    store_.with_task(task_id, [&](LoopTask& t) {
      t.first_exec_pending = false;
      t.last_run = now;
      if (is_schedule(t.trigger)) t.last_schedule_fire_date = format_date(now);
    });
    return;
  }
  store_.with_task(task_id, [&](LoopTask& t) {
    t.first_exec_pending = false;
    t.skill_ref = skill_ref;
    t.last_run = now;
    if (is_schedule(t.trigger)) t.last_schedule_fire_date = format_date(now);
  });
  log_line("INFO", task_id, "skill_compiled", skill_ref);
}

void Scheduler::run_replay(const LoopTask& task, TimePoint now, TickReport& report) {
  fs::create_directories(workdir_for(task.id));
  LoopSkill skill = load_skill(store_.paths(), *task.skill_ref);
  FixedClock frozen(now);
  ReplayOutcome outcome = replay(skill, runner_, workdir_for(task.id), frozen);
  if (outcome.ok()) {
    store_.mark_run(task.id, now);
    log_line("INFO", task.id, "replay_ok", "-");
    return;
  }
  DegradationEvent event{task.id, DegradationScenario::ReplayStepFailure, "retry_next_tick"};
  log_line("WARN", task.id, to_string(event.scenario), event.action_taken);
  report.events.push_back(std::move(event));
  // Interval tasks stay due (no last_run update). Schedule tasks still burn
  // today's fire so same-day dedup holds; the tolerance window provides the
  // remaining retries.
  if (is_schedule(task.trigger)) {
    store_.record_schedule_fire(task.id, format_date(now));
  }
}

void Scheduler::run_fallback(const LoopTask& task, TimePoint now) {
  fs::create_directories(workdir_for(task.id));
  Recorder recorder(runner_, workdir_for(task.id));
  FirstExecOutcome outcome =
      run_first_execution(task, planner_, recorder, options_.first_exec_deadline);
  switch (outcome.kind) {
    case FirstExecOutcome::Kind::Recorded:
      store_.mark_run(task.id, now);
      log_line("INFO", task.id, "planner_fallback_ok", "-");
      return;
    case FirstExecOutcome::Kind::Timeout:
      log_line("WARN", task.id, "planner_fallback_timeout", "retry_next_tick");
      return;
    case FirstExecOutcome::Kind::Exception:
      log_line("WARN", task.id, "planner_fallback_exception", outcome.message);
      return;
  }
}

void Scheduler::startup_sweep() {
  HeartbeatConfig config = store_.load_config();
  for (const auto& [id, task] : config.tasks) {
    if (!task.first_exec_pending) continue;
    // A crash mid-recording left no usable skill. Keep the task pending so
    // the next due tick re-records; drop any stale skill_ref.
    if (task.skill_ref) {
      store_.with_task(id, [](LoopTask& t) { t.skill_ref.reset(); });
    }
    log_line("INFO", id, "startup_sweep", "pending_re_record");
  }
}

void Scheduler::run_daemon(ShutdownSignal& shutdown) {
  startup_sweep();
  int ticks = 0;
  while (!shutdown.requested()) {
    try {
      tick();
    } catch (const std::exception& e) {
      log_line("ERROR", "-", "tick_failed", e.what());
    }
    ++ticks;
    if (tick_observer_) tick_observer_(ticks);
    if (shutdown.wait_for(options_.poll_interval)) break;
  }
  wait_for_first_execs();
}

void Scheduler::wait_for_first_execs() {
  std::vector<std::thread> to_join;
  {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [this] { return active_workers_ == 0; });
    to_join.swap(workers_);
  }
  for (auto& worker : to_join) {
    if (worker.joinable()) worker.join();
  }
}

}  // namespace loopskill
