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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopskill/task.hpp"
#include "loopskill/tool_runtime.hpp"

namespace loopskill {

/// Cooperative cancellation handed to planners so a deadline expiry can
/// unblock them.
class CancelToken {
 public:
  void cancel() {
    {
      std::lock_guard lock(mutex_);
      cancelled_ = true;
    }
    cv_.notify_all();
  }

  bool cancelled() const {
    std::lock_guard lock(mutex_);
    return cancelled_;
  }

  /// Blocks until cancelled or the wait elapses; returns true if cancelled.
  bool wait_for(std::chrono::milliseconds d) const {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, d, [this] { return cancelled_; });
  }

  void wait() const {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return cancelled_; });
  }

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  bool cancelled_ = false;
};

/// The single point of (simulated or real) LLM involvement. Implementations
/// drive recorder.record(...) once per tool step and may throw on faults.
class Planner {
 public:
  virtual ~Planner() = default;
  virtual void run(const LoopTask& task, Recorder& recorder, CancelToken& cancel) = 0;
};

struct Invocation {
  ToolKind tool = ToolKind::Bash;
  ArgMap args;

  friend bool operator==(const Invocation&, const Invocation&) = default;
};

struct PlannerFault {
  enum class Kind { None, RaiseException, Hang, InjectErrorResultAt };
  Kind kind = Kind::None;
  int at_step = 0;  // InjectErrorResultAt only

  friend bool operator==(const PlannerFault&, const PlannerFault&) = default;
};

/// Deterministic stand-in for the live model: a fixed invocation list per
/// task description plus an optional injected fault.
struct PlannerScript {
  std::map<std::string, std::vector<Invocation>> entries;
  PlannerFault fault;
};

nlohmann::ordered_json planner_script_to_json(const PlannerScript& script);
PlannerScript planner_script_from_json(const nlohmann::json& j);
PlannerScript load_planner_script(const std::filesystem::path& path);

/// Returns the invocation list for `description` verbatim.
/// Throws NotFoundError if the script has no entry for it.
std::vector<Invocation> scripted_plan(const PlannerScript& script, const std::string& description);

class ScriptedPlanner final : public Planner {
 public:
  explicit ScriptedPlanner(PlannerScript script) : script_(std::move(script)) {}

  void run(const LoopTask& task, Recorder& recorder, CancelToken& cancel) override;

  /// Total run() entries across the planner's lifetime.
  int run_count() const { return run_count_.load(); }

 private:
  PlannerScript script_;
  std::atomic<int> run_count_{0};
};

/// Counts delegated run() calls; wraps any planner so tests can assert the
/// planner-free property of replay paths.
class CountingPlanner final : public Planner {
 public:
  explicit CountingPlanner(Planner& inner) : inner_(inner) {}

  void run(const LoopTask& task, Recorder& recorder, CancelToken& cancel) override {
    count_.fetch_add(1);
    inner_.run(task, recorder, cancel);
  }

  int count() const { return count_.load(); }

 private:
  Planner& inner_;
  std::atomic<int> count_{0};
};

struct FirstExecOutcome {
  enum class Kind { Recorded, Timeout, Exception };

  Kind kind = Kind::Recorded;
  ToolChain chain;      // Recorded only
  std::string message;  // Exception only

  static FirstExecOutcome recorded(ToolChain chain) {
    return FirstExecOutcome{Kind::Recorded, std::move(chain), {}};
  }
  static FirstExecOutcome timeout() { return FirstExecOutcome{Kind::Timeout, {}, {}}; }
  static FirstExecOutcome exception(std::string message) {
    return FirstExecOutcome{Kind::Exception, {}, std::move(message)};
  }
};

/// Runs the planner on a worker thread under a deadline. All outcomes are
/// values; a Timeout discards the partial chain and the caller is responsible
/// for clearing first_exec_pending in every case.
FirstExecOutcome run_first_execution(const LoopTask& task, Planner& planner, Recorder& recorder,
                                     std::chrono::milliseconds deadline);

/// Declared adapter configuration for a live hosted model. The credential is
/// read from the environment; the system prompt from `prompt_path`. No live
/// adapter is bundled: the returned planner reports itself unavailable when
/// run, which degrades the task instead of stalling it.
struct LivePlannerConfig {
  std::string endpoint;
  std::string model;
  std::string api_key_env = "LOOP_PLANNER_API_KEY";
  std::filesystem::path prompt_path = "planner_prompt.txt";
};

std::unique_ptr<Planner> make_live_planner(const LivePlannerConfig& config);

}  // namespace loopskill
