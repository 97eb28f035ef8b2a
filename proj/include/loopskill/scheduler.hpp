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

#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "loopskill/clock.hpp"
#include "loopskill/planner.hpp"
#include "loopskill/skill.hpp"
#include "loopskill/store.hpp"
#include "loopskill/task.hpp"
#include "loopskill/tool_runtime.hpp"

namespace loopskill {

// ---------------------------------------------------------------------------
// Tick decisions
// ---------------------------------------------------------------------------

enum class TickAction { StartFirstExec, Replay, PlannerFallback, Skip };

enum class SkipReason { None, NotDue, OutsideActiveHours, AlreadyRanToday, PendingInFlight, Disabled };

std::string_view to_string(TickAction action);
std::string_view to_string(SkipReason reason);

struct TickDecision {
  std::string task_id;
  TickAction action = TickAction::Skip;
  SkipReason reason = SkipReason::None;

  friend bool operator==(const TickDecision&, const TickDecision&) = default;
};

/// Why a task dropped out of the record/replay fast path and what was done
/// about it. Every scenario except UserRemove leaves the task schedulable.
enum class DegradationScenario {
  EmptyChain,
  ContainsEditFile,
  ErrorKeyword,
  NoWriteFile,
  FirstExecTimeout,
  FirstExecException,
  ReplayStepFailure,
  UserRemove,
};

std::string_view to_string(DegradationScenario scenario);

/// Maps a validation failure onto its degradation row. Precondition: the
/// report is invalid; the first failure wins.
DegradationScenario scenario_for(const PsiFailure& failure);

struct DegradationEvent {
  std::string task_id;
  DegradationScenario scenario = DegradationScenario::EmptyChain;
  std::string action_taken;  // snake_case reason code for the log line

  friend bool operator==(const DegradationEvent&, const DegradationEvent&) = default;
};

struct TickReport {
  std::vector<TickDecision> decisions;
  std::vector<DegradationEvent> events;
};

// ---------------------------------------------------------------------------
// Trigger predicates (pure)
// ---------------------------------------------------------------------------

/// True iff the task never ran or at least the configured interval elapsed.
bool is_due_interval(const LoopTask& task, TimePoint now);

/// True iff now is within +/- 5 minutes of the scheduled minute and the task
/// has not already fired on today's date.
bool is_due_schedule(const LoopTask& task, TimePoint now);

/// Absent hours always pass. start < end is the half-open window
/// [start, end); start > end wraps across midnight.
bool in_active_hours(const std::optional<ActiveHours>& hours, TimePoint now);

/// Pure decision function. `skill_loads` reports whether the task's skill_ref
/// resolves to a loadable document; the caller supplies it so the decision
/// itself stays a function of its inputs.
TickDecision decide(const LoopTask& task, TimePoint now, const std::set<std::string>& in_flight,
                    bool skill_loads);

// ---------------------------------------------------------------------------
// Daemon plumbing
// ---------------------------------------------------------------------------

/// One-shot latch deliverable from any execution context.
class ShutdownSignal {
 public:
  void request() {
    {
      std::lock_guard lock(mutex_);
      requested_ = true;
    }
    cv_.notify_all();
  }

  bool requested() const {
    std::lock_guard lock(mutex_);
    return requested_;
  }

  /// Blocks until requested or the wait elapses; returns true if requested.
  bool wait_for(std::chrono::milliseconds d) const {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, d, [this] { return requested_; });
  }

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  bool requested_ = false;
};

struct SchedulerOptions {
  std::chrono::milliseconds poll_interval{60'000};
  std::chrono::milliseconds first_exec_deadline{300'000};
  std::filesystem::path workdir_root;  // per-task workdirs live under here
};

/// The execution layer. One ticker evaluates every task in id order; first
/// executions run on per-task background workers under a deadline; replays
/// and planner fallbacks run inline on the ticker.
class Scheduler {
 public:
  Scheduler(HeartbeatStore& store, ToolRunner& runner, Planner& planner, const Clock& clock,
            SchedulerOptions options, std::ostream* log = nullptr);
  ~Scheduler();

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  /// One evaluation pass at clock time (or an explicit instant). Degradation
  /// events from background first executions surface on the next tick.
  TickReport tick();
  TickReport tick(TimePoint now);

  /// Tasks left pending by a crash mid-recording stay pending so the next due
  /// tick re-records; a stale skill_ref on such a task is dropped.
  void startup_sweep();

  /// tick + sleep loop until the signal fires. Individual tick failures are
  /// logged and never terminate the loop.
  void run_daemon(ShutdownSignal& shutdown);

  /// Blocks until no first execution is in flight and joins finished workers.
  void wait_for_first_execs();

  /// Takes the events buffered for the next tick. One-shot callers use this
  /// after wait_for_first_execs so late worker outcomes are not lost.
  std::vector<DegradationEvent> drain_events();

  /// Called with the 1-based tick count after every daemon tick.
  void set_tick_observer(std::function<void(int)> observer);

 private:
  void execute_decision(const TickDecision& decision, const LoopTask& task, TimePoint now,
                        TickReport& report);
  void start_first_execution(const LoopTask& task, TimePoint now);
  void complete_first_execution(const std::string& task_id, const FirstExecOutcome& outcome,
                                TimePoint now);
  void run_replay(const LoopTask& task, TimePoint now, TickReport& report);
  void run_fallback(const LoopTask& task, TimePoint now);
  bool skill_loadable(const LoopTask& task) const;
  std::filesystem::path workdir_for(const std::string& task_id) const;
  void log_line(std::string_view level, const std::string& task_id, std::string_view action,
                std::string_view reason);
  void push_event(DegradationEvent event);

  HeartbeatStore& store_;
  ToolRunner& runner_;
  Planner& planner_;
  const Clock& clock_;
  SchedulerOptions options_;
  std::ostream* log_;
  std::function<void(int)> tick_observer_;

  mutable std::mutex mutex_;
  std::condition_variable idle_cv_;
  std::set<std::string> in_flight_;
  std::vector<DegradationEvent> pending_events_;
  std::vector<std::thread> workers_;
  int active_workers_ = 0;
};

}  // namespace loopskill
