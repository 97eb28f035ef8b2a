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

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "loopskill/clock.hpp"

namespace loopskill {

/// A positive whole number of minutes between interval-mode executions.
struct IntervalSpec {
  int minutes = 1;

  friend bool operator==(const IntervalSpec&, const IntervalSpec&) = default;
};

/// Parses "<int>[m|h|d]"; a bare integer means minutes.
/// Throws ParseError for anything else (empty input, zero or negative
/// quantity, unknown unit, compound expressions like "1h30m").
IntervalSpec parse_interval(std::string_view text);

/// Dispatch window in minutes-since-midnight. start > end wraps past midnight;
/// start == end is rejected as ambiguous.
struct ActiveHours {
  int start_minute = 0;
  int end_minute = 0;

  friend bool operator==(const ActiveHours&, const ActiveHours&) = default;
};

/// Validates bounds and returns the window. Throws ParseError on violation.
ActiveHours make_active_hours(int start_minute, int end_minute);

struct IntervalTrigger {
  IntervalSpec every;

  friend bool operator==(const IntervalTrigger&, const IntervalTrigger&) = default;
};

struct ScheduleTrigger {
  int at_minute = 0;  // minutes since midnight, [0, 1440)

  friend bool operator==(const ScheduleTrigger&, const ScheduleTrigger&) = default;
};

using Trigger = std::variant<IntervalTrigger, ScheduleTrigger>;

inline bool is_interval(const Trigger& t) { return std::holds_alternative<IntervalTrigger>(t); }
inline bool is_schedule(const Trigger& t) { return std::holds_alternative<ScheduleTrigger>(t); }

struct LoopTask {
  std::string id;
  std::string description;
  Trigger trigger = IntervalTrigger{};
  std::optional<ActiveHours> active_hours;
  bool first_exec_pending = true;
  bool enabled = true;
  std::optional<TimePoint> last_run;
  std::optional<std::string> last_schedule_fire_date;  // "YYYY-MM-DD", Schedule mode only
  std::optional<std::string> skill_ref;                // store-relative path to skill.json

  friend bool operator==(const LoopTask&, const LoopTask&) = default;
};

/// Lowercases, maps non-alphanumerics to '_', collapses runs, trims edge '_'.
std::string slugify(std::string_view description);

/// Supplies 4-character suffixes over [a-z0-9]. Injected so callers choose the
/// policy (random in production, fixed in tests).
using SuffixSource = std::function<std::string()>;

/// Seeded mt19937-backed SuffixSource.
SuffixSource random_suffix_source();
SuffixSource random_suffix_source(unsigned seed);

/// "loop_" + first 8 slug characters + "_" + 4-char suffix.
/// Throws ParseError if the description slugs to empty.
std::string derive_task_id(std::string_view description, const SuffixSource& suffix_source);

/// Re-draws the suffix while `taken(id)` holds, up to 16 attempts, then throws.
std::string derive_unique_task_id(std::string_view description, const SuffixSource& suffix_source,
                                  const std::function<bool(const std::string&)>& taken);

/// True iff `id` matches loop_<slug-prefix>_<4-char suffix>.
bool is_valid_task_id(std::string_view id);

/// Fresh task: first_exec_pending=true, enabled=true, no run history, no skill.
LoopTask create_task(std::string_view description, Trigger trigger,
                     std::optional<ActiveHours> active_hours, const SuffixSource& suffix_source);

nlohmann::ordered_json task_to_json(const LoopTask& task);
LoopTask task_from_json(const nlohmann::json& j);

}  // namespace loopskill
