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

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "loopskill/clock.hpp"
#include "loopskill/store.hpp"
#include "loopskill/tool_runtime.hpp"

namespace loopskill {

// ---------------------------------------------------------------------------
// Validation predicate
// ---------------------------------------------------------------------------

enum class PsiRule { EmptyChain, ContainsEditFile, ErrorKeywordInResult, NoWriteFile };

std::string_view to_string(PsiRule rule);

struct PsiFailure {
  PsiRule rule = PsiRule::EmptyChain;
  int step = 0;  // ErrorKeywordInResult only

  friend bool operator==(const PsiFailure&, const PsiFailure&) = default;
};

struct ValidationReport {
  bool valid = false;
  std::vector<PsiFailure> failures;  // all violated rules, not just the first
};

struct ValidationOptions {
  /// Case-insensitive substrings that mark a result as failed.
  std::vector<std::string> error_keywords;
};

const std::vector<std::string>& default_error_keywords();

/// Replay-safety check: non-empty, no edit_file, no error keyword in any
/// result, at least one write_file step.
ValidationReport validate_chain(const ToolChain& chain, const ValidationOptions& options = {});

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Pass 1 of template extraction: everything collected from one traversal of
/// the recorded chain.
struct ExtractionContext {
  std::map<int, std::string> cleaned_results;  // step -> boundary-trimmed result
  std::map<int, std::string> read_snippets;    // read_file step -> full result
  std::set<int> date_step_indices;             // bash steps whose command is `date ...`
  std::optional<std::string> last_read_path;
};

ExtractionContext collect_info(const ToolChain& chain);

/// Strip of leading/trailing whitespace used for "cleaned" results; internal
/// whitespace is preserved so templates stay reversible.
std::string clean_result(std::string_view raw);

// ---------------------------------------------------------------------------
// Datetime literals
// ---------------------------------------------------------------------------

enum class TimeFormat { IsoSecondsT, IsoSecondsSpace, IsoMinutesT, IsoMinutesSpace };

std::string_view to_string(TimeFormat format);
TimeFormat time_format_from_string(std::string_view name);
std::string format_datetime(TimePoint tp, TimeFormat format);

enum class DatetimeVariant { IsoSecondsT, IsoSecondsSpace, IsoMinutesT, IsoMinutesSpace, DateOnly };

struct DatetimeMatch {
  size_t pos = 0;
  size_t len = 0;
  DatetimeVariant variant = DatetimeVariant::DateOnly;

  friend bool operator==(const DatetimeMatch&, const DatetimeMatch&) = default;
};

/// Finds non-overlapping datetime literals left to right, longest variant
/// first at each position: seconds > minutes > date-only.
std::vector<DatetimeMatch> match_datetime(std::string_view text);

// ---------------------------------------------------------------------------
// Template tokens
// ---------------------------------------------------------------------------

/// A recognized {{...}} token inside template text. Unrecognized brace pairs
/// are not tokens and stay literal everywhere.
struct PlaceholderRef {
  enum class Kind { CurrentTime, CurrentDate, StepResult, PrevContent };

  Kind kind = Kind::CurrentTime;
  int step = 0;  // set for StepResult only
  size_t pos = 0;
  size_t len = 0;

  friend bool operator==(const PlaceholderRef&, const PlaceholderRef&) = default;
};

std::vector<PlaceholderRef> scan_placeholders(std::string_view text);

// ---------------------------------------------------------------------------
// Compiled skill
// ---------------------------------------------------------------------------

struct SkillStep {
  int original_step = 0;  // index in the recording, preserved after removals
  ToolKind tool = ToolKind::Bash;
  ArgMap args;  // template strings for write_file, literals otherwise

  friend bool operator==(const SkillStep&, const SkillStep&) = default;
};

struct LoopSkill {
  std::string task_id;
  std::vector<SkillStep> steps;
  TimeFormat time_format = TimeFormat::IsoSecondsT;
  TimePoint created_at{};
  std::string source_chain_digest;  // advisory audit hash, not enforced on load

  friend bool operator==(const LoopSkill&, const LoopSkill&) = default;
};

struct CompileOptions {
  /// Candidate values shorter than this never become placeholders; keeps
  /// short generic substrings from corrupting unrelated text.
  size_t min_match_len = 6;
};

/// Pass 2: drops date steps, parameterizes write_file content greedily by
/// descending candidate length, then scrubs datetime literals from write
/// content and path args. Precondition: validate_chain(chain).valid and
/// ctx == collect_info(chain).
LoopSkill build_steps(const ToolChain& chain, const ExtractionContext& ctx,
                      const CompileOptions& options = {});

/// validate-free convenience: collect_info + build_steps + metadata stamps.
LoopSkill compile_skill(const std::string& task_id, const ToolChain& chain, TimePoint created_at,
                        const CompileOptions& options = {});

/// FNV-1a 64-bit over the canonical chain serialization.
std::string chain_digest(const ToolChain& chain);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

nlohmann::ordered_json skill_to_json(const LoopSkill& skill);
LoopSkill skill_from_json(const nlohmann::json& j);
std::string serialize_skill(const LoopSkill& skill);
LoopSkill deserialize_skill(std::string_view bytes);

/// Writes <skills_dir>/<task_id>/skill.json via atomic_write and returns the
/// store-relative skill_ref.
std::string save_skill(const LoopSkill& skill, const StorePaths& paths);

/// Loads by store-relative skill_ref. Throws NotFoundError / CorruptionError.
LoopSkill load_skill(const StorePaths& paths, const std::string& skill_ref);
LoopSkill load_skill_for_task(const StorePaths& paths, const std::string& task_id);

}  // namespace loopskill
