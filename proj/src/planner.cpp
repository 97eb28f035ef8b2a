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

#include "loopskill/planner.hpp"

#include <cstdlib>
#include <thread>

#include "loopskill/errors.hpp"
#include "loopskill/store.hpp"

namespace loopskill {

namespace {

std::string fault_kind_name(PlannerFault::Kind kind) {
  switch (kind) {
    case PlannerFault::Kind::None:
      return "none";
    case PlannerFault::Kind::RaiseException:
      return "raise_exception";
    case PlannerFault::Kind::Hang:
      return "hang";
    case PlannerFault::Kind::InjectErrorResultAt:
      return "inject_error_result_at";
  }
  return "none";
}

PlannerFault::Kind fault_kind_from(const std::string& name) {
  if (name == "none") return PlannerFault::Kind::None;
  if (name == "raise_exception") return PlannerFault::Kind::RaiseException;
  if (name == "hang") return PlannerFault::Kind::Hang;
  if (name == "inject_error_result_at") return PlannerFault::Kind::InjectErrorResultAt;
  throw ParseError("unknown planner fault \"" + name + "\"");
}

}  // namespace

nlohmann::ordered_json planner_script_to_json(const PlannerScript& script) {
  nlohmann::ordered_json j;
  j["entries"] = nlohmann::ordered_json::object();
  for (const auto& [description, invocations] : script.entries) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& inv : invocations) {
      nlohmann::ordered_json item;
      item["tool"] = std::string(to_string(inv.tool));
      item["args"] = inv.args;
      list.push_back(std::move(item));
    }
    j["entries"][description] = std::move(list);
  }
  j["fault"] = {{"kind", fault_kind_name(script.fault.kind)}};
  if (script.fault.kind == PlannerFault::Kind::InjectErrorResultAt) {
    j["fault"]["step"] = script.fault.at_step;
  }
  return j;
}

PlannerScript planner_script_from_json(const nlohmann::json& j) {
  try {
    PlannerScript script;
    for (const auto& [description, list] : j.at("entries").items()) {
      std::vector<Invocation> invocations;
      for (const auto& item : list) {
        Invocation inv;
        inv.tool = tool_from_string(item.at("tool").get<std::string>());
        for (const auto& [key, value] : item.at("args").items()) {
          inv.args[key] = value.get<std::string>();
        }
        check_args(inv.tool, inv.args);
        invocations.push_back(std::move(inv));
      }
      script.entries[description] = std::move(invocations);
    }
    if (j.contains("fault")) {
      script.fault.kind = fault_kind_from(j.at("fault").at("kind").get<std::string>());
      if (script.fault.kind == PlannerFault::Kind::InjectErrorResultAt) {
        script.fault.at_step = j.at("fault").at("step").get<int>();
      }
    }
    return script;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed planner script: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptionError(std::string("malformed planner script: ") + e.what());
  }
}

PlannerScript load_planner_script(const std::filesystem::path& path) {
  auto bytes = read_file_if_exists(path);
  if (!bytes) throw NotFoundError("planner script not found: " + path.string());
  nlohmann::json j = nlohmann::json::parse(*bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw CorruptionError("planner script is not valid JSON");
  return planner_script_from_json(j);
}

std::vector<Invocation> scripted_plan(const PlannerScript& script,
                                      const std::string& description) {
  auto it = script.entries.find(description);
  if (it == script.entries.end()) {
    throw NotFoundError("no plan for task description \"" + description + "\"");
  }
  return it->second;
}

void ScriptedPlanner::run(const LoopTask& task, Recorder& recorder, CancelToken& cancel) {
  run_count_.fetch_add(1);
  if (script_.fault.kind == PlannerFault::Kind::RaiseException) {
    throw Error("injected");
  }
  if (script_.fault.kind == PlannerFault::Kind::Hang) {
    cancel.wait();
    return;
  }
  std::vector<Invocation> plan = scripted_plan(script_, task.description);
  int step = 0;
  for (const auto& inv : plan) {
    ++step;
    if (cancel.cancelled()) return;
    if (script_.fault.kind == PlannerFault::Kind::InjectErrorResultAt &&
        step == script_.fault.at_step) {
      // Rewritten so the tool returns an in-band "Error: " result.
      recorder.record(ToolKind::Bash, {{"command", "echo 'Error: injected step failure'"}});
      continue;
    }
    recorder.record(inv.tool, inv.args);
  }
}

FirstExecOutcome run_first_execution(const LoopTask& task, Planner& planner, Recorder& recorder,
                                     std::chrono::milliseconds deadline) {
  struct Shared {
    std::mutex mutex;
    std::condition_variable cv;
    bool done = false;
    std::optional<std::string> error;
  };
  auto shared = std::make_shared<Shared>();
  CancelToken cancel;

  std::thread worker([&planner, &task, &recorder, &cancel, shared] {
    std::optional<std::string> error;
    try {
      planner.run(task, recorder, cancel);
    } catch (const std::exception& e) {
      error = e.what();
    } catch (...) {
      error = "unknown planner failure";
    }
    std::lock_guard lock(shared->mutex);
    shared->error = std::move(error);
    shared->done = true;
    shared->cv.notify_all();
  });

  bool finished = false;
  {
    std::unique_lock lock(shared->mutex);
    finished = shared->cv.wait_for(lock, deadline, [&] { return shared->done; });
  }
  if (!finished) {
    cancel.cancel();
    worker.join();
    return FirstExecOutcome::timeout();
  }
  worker.join();
  if (shared->error) {
    return FirstExecOutcome::exception(*shared->error);
  }
  return FirstExecOutcome::recorded(recorder.take_chain());
}

namespace {

/// Placeholder for the hosted-model adapter. Validates configuration up
/// front and fails the first execution when actually run, which routes the
/// task through the normal degradation path.
class LivePlanner final : public Planner {
 public:
  explicit LivePlanner(LivePlannerConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    has_credential_ = key != nullptr && *key != '\0';
    if (auto prompt = read_file_if_exists(config_.prompt_path)) {
      system_prompt_ = *prompt;
    }
  }

  void run(const LoopTask&, Recorder&, CancelToken&) override {
    if (!has_credential_) {
      throw Error("live planner: no credential in $" + config_.api_key_env);
    }
    throw Error("live planner adapter is not bundled with this build; use a scripted planner");
  }

 private:
  LivePlannerConfig config_;
  std::string system_prompt_;
  bool has_credential_ = false;
};

}  // namespace

std::unique_ptr<Planner> make_live_planner(const LivePlannerConfig& config) {
  return std::make_unique<LivePlanner>(config);
}

}  // namespace loopskill
