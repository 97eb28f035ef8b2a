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

#include "loopskill/task.hpp"

#include <cctype>
#include <memory>
#include <random>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace {

constexpr std::string_view kSuffixAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr size_t kSlugPrefixCap = 8;
constexpr size_t kSuffixLen = 4;
constexpr int kMinutesPerDay = 1440;

bool is_lower_alnum(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_suffix(std::string_view s) {
  if (s.size() != kSuffixLen) return false;
  for (char c : s) {
    if (!is_lower_alnum(c)) return false;
  }
  return true;
}

}  // namespace

IntervalSpec parse_interval(std::string_view text) {
  std::string_view s = trim(text);
  if (s.empty()) throw ParseError("empty interval expression");

  std::string_view digits = s;
  int unit_minutes = 1;
  char last = s.back();
  if (last == 'm' || last == 'h' || last == 'd') {
    digits = s.substr(0, s.size() - 1);
    unit_minutes = last == 'm' ? 1 : last == 'h' ? 60 : kMinutesPerDay;
  } else if (last < '0' || last > '9') {
    throw ParseError("unknown interval unit in \"" + std::string(s) + "\"");
  }

  if (digits.empty()) throw ParseError("missing quantity in \"" + std::string(s) + "\"");
  long long value = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') {
      throw ParseError("invalid interval token \"" + std::string(s) + "\"");
    }
    value = value * 10 + (c - '0');
    if (value > 10'000'000) throw ParseError("interval too large: \"" + std::string(s) + "\"");
  }
  if (value == 0) throw ParseError("zero interval: \"" + std::string(s) + "\"");
  return IntervalSpec{static_cast<int>(value * unit_minutes)};
}

ActiveHours make_active_hours(int start_minute, int end_minute) {
  if (start_minute < 0 || start_minute >= kMinutesPerDay || end_minute < 0 ||
      end_minute >= kMinutesPerDay) {
    throw ParseError("active hours out of range [0, 1440)");
  }
  if (start_minute == end_minute) {
    throw ParseError("active hours start equals end; window is ambiguous");
  }
  return ActiveHours{start_minute, end_minute};
}

std::string slugify(std::string_view description) {
  std::string slug;
  slug.reserve(description.size());
  bool last_was_sep = false;
  for (char ch : description) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      slug.push_back(static_cast<char>(std::tolower(c)));
      last_was_sep = false;
    } else if (!slug.empty() && !last_was_sep) {
      slug.push_back('_');
      last_was_sep = true;
    }
  }
  while (!slug.empty() && slug.back() == '_') slug.pop_back();
  return slug;
}

SuffixSource random_suffix_source() { return random_suffix_source(std::random_device{}()); }

SuffixSource random_suffix_source(unsigned seed) {
  auto rng = std::make_shared<std::mt19937>(seed);
  return [rng]() {
    std::uniform_int_distribution<size_t> dist(0, kSuffixAlphabet.size() - 1);
    std::string out;
    for (size_t i = 0; i < kSuffixLen; ++i) out.push_back(kSuffixAlphabet[dist(*rng)]);
    return out;
  };
}

std::string derive_task_id(std::string_view description, const SuffixSource& suffix_source) {
  std::string slug = slugify(description);
  if (slug.empty()) {
    throw ParseError("description \"" + std::string(description) + "\" slugs to empty");
  }
  std::string suffix = suffix_source();
  if (!valid_suffix(suffix)) {
    throw std::invalid_argument("suffix source produced invalid suffix \"" + suffix + "\"");
  }
  return "loop_" + slug.substr(0, kSlugPrefixCap) + "_" + suffix;
}

std::string derive_unique_task_id(std::string_view description, const SuffixSource& suffix_source,
                                  const std::function<bool(const std::string&)>& taken) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    std::string id = derive_task_id(description, suffix_source);
    if (!taken(id)) return id;
  }
  throw Error("could not derive a unique task id for \"" + std::string(description) +
              "\" after 16 attempts");
}

bool is_valid_task_id(std::string_view id) {
  constexpr std::string_view prefix = "loop_";
  if (id.size() < prefix.size() + 1 + 1 + kSuffixLen) return false;
  if (id.substr(0, prefix.size()) != prefix) return false;
  if (!valid_suffix(id.substr(id.size() - kSuffixLen))) return false;
  if (id[id.size() - kSuffixLen - 1] != '_') return false;
  std::string_view slug = id.substr(prefix.size(), id.size() - prefix.size() - kSuffixLen - 1);
  if (slug.empty() || slug.size() > kSlugPrefixCap) return false;
  for (char c : slug) {
    if (!is_lower_alnum(c) && c != '_') return false;
  }
  return slug.front() != '_';
}

LoopTask create_task(std::string_view description, Trigger trigger,
                     std::optional<ActiveHours> active_hours, const SuffixSource& suffix_source) {
  std::string_view desc = trim(description);
  if (desc.empty()) throw ParseError("task description is empty");
  if (const auto* schedule = std::get_if<ScheduleTrigger>(&trigger)) {
    if (schedule->at_minute < 0 || schedule->at_minute >= kMinutesPerDay) {
      throw ParseError("schedule minute out of range [0, 1440)");
    }
  } else {
    if (std::get<IntervalTrigger>(trigger).every.minutes < 1) {
      throw ParseError("interval must be at least one minute");
    }
  }
  LoopTask task;
  task.id = derive_task_id(desc, suffix_source);
  task.description = std::string(desc);
  task.trigger = trigger;
  task.active_hours = active_hours;
  task.first_exec_pending = true;
  task.enabled = true;
  return task;
}

nlohmann::ordered_json task_to_json(const LoopTask& task) {
  nlohmann::ordered_json j;
  j["id"] = task.id;
  j["description"] = task.description;
  if (const auto* interval = std::get_if<IntervalTrigger>(&task.trigger)) {
    j["trigger"] = {{"mode", "interval"}, {"minutes", interval->every.minutes}};
  } else {
    j["trigger"] = {{"mode", "schedule"},
                    {"at_minute", std::get<ScheduleTrigger>(task.trigger).at_minute}};
  }
  if (task.active_hours) {
    j["active_hours"] = {{"start_minute", task.active_hours->start_minute},
                         {"end_minute", task.active_hours->end_minute}};
  } else {
    j["active_hours"] = nullptr;
  }
  j["first_exec_pending"] = task.first_exec_pending;
  j["enabled"] = task.enabled;
  j["last_run"] = task.last_run ? nlohmann::ordered_json(format_timestamp(*task.last_run))
                                : nlohmann::ordered_json(nullptr);
  j["last_schedule_fire_date"] = task.last_schedule_fire_date
                                     ? nlohmann::ordered_json(*task.last_schedule_fire_date)
                                     : nlohmann::ordered_json(nullptr);
  j["skill_ref"] =
      task.skill_ref ? nlohmann::ordered_json(*task.skill_ref) : nlohmann::ordered_json(nullptr);
  return j;
}

LoopTask task_from_json(const nlohmann::json& j) {
  try {
    LoopTask task;
    task.id = j.at("id").get<std::string>();
    task.description = j.at("description").get<std::string>();
    const auto& trig = j.at("trigger");
    std::string mode = trig.at("mode").get<std::string>();
    if (mode == "interval") {
      task.trigger = IntervalTrigger{IntervalSpec{trig.at("minutes").get<int>()}};
    } else if (mode == "schedule") {
      task.trigger = ScheduleTrigger{trig.at("at_minute").get<int>()};
    } else {
      throw CorruptionError("unknown trigger mode \"" + mode + "\"");
    }
    if (j.contains("active_hours") && !j.at("active_hours").is_null()) {
      const auto& hours = j.at("active_hours");
      task.active_hours = make_active_hours(hours.at("start_minute").get<int>(),
                                            hours.at("end_minute").get<int>());
    }
    task.first_exec_pending = j.at("first_exec_pending").get<bool>();
    task.enabled = j.at("enabled").get<bool>();
    if (j.contains("last_run") && !j.at("last_run").is_null()) {
      task.last_run = parse_timestamp(j.at("last_run").get<std::string>());
    }
    if (j.contains("last_schedule_fire_date") && !j.at("last_schedule_fire_date").is_null()) {
      task.last_schedule_fire_date = j.at("last_schedule_fire_date").get<std::string>();
    }
    if (j.contains("skill_ref") && !j.at("skill_ref").is_null()) {
      task.skill_ref = j.at("skill_ref").get<std::string>();
    }
    return task;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed task document: ") + e.what());
  } catch (const ParseError& e) {
    throw CorruptionError(std::string("malformed task document: ") + e.what());
  }
}

}  // namespace loopskill
