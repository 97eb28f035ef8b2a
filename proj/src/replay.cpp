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

#include "loopskill/replay.hpp"

#include "loopskill/errors.hpp"

namespace loopskill {

std::string resolve_template(const std::string& text, const ReplayContext& ctx) {
  std::string out;
  out.reserve(text.size());
  size_t cursor = 0;
  for (const auto& ref : scan_placeholders(text)) {
    out.append(text, cursor, ref.pos - cursor);
    switch (ref.kind) {
      case PlaceholderRef::Kind::CurrentTime:
        out += format_datetime(ctx.now, ctx.time_format);
        break;
      case PlaceholderRef::Kind::CurrentDate:
        out += format_date(ctx.now);
        break;
      case PlaceholderRef::Kind::StepResult: {
        auto it = ctx.results.find(ref.step);
        if (it == ctx.results.end()) {
          throw UnresolvedVariableError("{{step_" + std::to_string(ref.step) +
                                        "_result}} has no recorded value");
        }
        out += it->second;
        break;
      }
      case PlaceholderRef::Kind::PrevContent:
        if (!ctx.prev_content) {
          throw UnresolvedVariableError("{{prev_content}} used before any read_file step");
        }
        out += *ctx.prev_content;
        break;
    }
    cursor = ref.pos + ref.len;
  }
  out.append(text, cursor, text.size() - cursor);
  return out;
}

ReplayOutcome ReplayOutcome::success(std::vector<ReplayStepTrace> trace) {
  ReplayOutcome o;
  o.kind = Kind::Success;
  o.trace = std::move(trace);
  return o;
}

ReplayOutcome ReplayOutcome::step_failure(std::vector<ReplayStepTrace> trace, int failed_step,
                                          std::string failure_result) {
  ReplayOutcome o;
  o.kind = Kind::StepFailure;
  o.trace = std::move(trace);
  o.failed_step = failed_step;
  o.failure_result = std::move(failure_result);
  return o;
}

ReplayOutcome replay(const LoopSkill& skill, ToolRunner& runner,
                     const std::filesystem::path& workdir, const Clock& clock) {
  ReplayContext ctx;
  ctx.now = clock.now();
  ctx.time_format = skill.time_format;

  std::vector<ReplayStepTrace> trace;
  trace.reserve(skill.steps.size());

  for (const auto& step : skill.steps) {
    ReplayStepTrace entry;
    entry.original_step = step.original_step;
    entry.tool = step.tool;
    try {
      for (const auto& [key, value] : step.args) {
        entry.resolved_args[key] = resolve_template(value, ctx);
      }
    } catch (const UnresolvedVariableError& e) {
      entry.result = std::string("Error: ") + e.what();
      trace.push_back(entry);
      return ReplayOutcome::step_failure(std::move(trace), step.original_step,
                                         std::string("Error: ") + e.what());
    }
    entry.result = runner.execute(step.tool, entry.resolved_args, workdir);
    trace.push_back(entry);
    if (entry.result.rfind("Error: ", 0) == 0) {
      return ReplayOutcome::step_failure(std::move(trace), step.original_step, entry.result);
    }
    ctx.results[step.original_step] = clean_result(entry.result);
    if (step.tool == ToolKind::ReadFile) {
      ctx.prev_content = entry.result;
    }
  }
  return ReplayOutcome::success(std::move(trace));
}

}  // namespace loopskill
