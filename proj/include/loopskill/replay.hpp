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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loopskill/clock.hpp"
#include "loopskill/skill.hpp"
#include "loopskill/tool_runtime.hpp"

namespace loopskill {

/// Bindings available while one skill run resolves its templates. `now` is
/// sampled once per run so every step sees the same instant.
struct ReplayContext {
  TimePoint now{};
  TimeFormat time_format = TimeFormat::IsoSecondsT;
  std::map<int, std::string> results;  // cleaned, keyed by original_step
  std::optional<std::string> prev_content;
};

/// Expands recognized {{...}} tokens; all other text passes through verbatim.
/// Throws UnresolvedVariableError when a token has no binding.
std::string resolve_template(const std::string& text, const ReplayContext& ctx);

struct ReplayStepTrace {
  int original_step = 0;
  ToolKind tool = ToolKind::Bash;
  ArgMap resolved_args;
  std::string result;

  friend bool operator==(const ReplayStepTrace&, const ReplayStepTrace&) = default;
};

struct ReplayOutcome {
  enum class Kind { Success, StepFailure };

  Kind kind = Kind::Success;
  std::vector<ReplayStepTrace> trace;  // includes the failing step, if any
  int failed_step = 0;
  std::string failure_result;

  bool ok() const { return kind == Kind::Success; }

  static ReplayOutcome success(std::vector<ReplayStepTrace> trace);
  static ReplayOutcome step_failure(std::vector<ReplayStepTrace> trace, int failed_step,
                                    std::string failure_result);
};

/// Runs every skill step in order with no planner involvement. The clock is
/// sampled exactly once; execution halts at the first "Error: " result or
/// unresolved variable.
ReplayOutcome replay(const LoopSkill& skill, ToolRunner& runner,
                     const std::filesystem::path& workdir, const Clock& clock);

}  // namespace loopskill
