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

#include "loopskill/skill.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cstdint>
#include <cstdio>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Validation predicate
// ---------------------------------------------------------------------------

std::string_view to_string(PsiRule rule) {
  switch (rule) {
    case PsiRule::EmptyChain:
      return "EmptyChain";
    case PsiRule::ContainsEditFile:
      return "ContainsEditFile";
    case PsiRule::ErrorKeywordInResult:
      return "ErrorKeywordInResult";
    case PsiRule::NoWriteFile:
      return "NoWriteFile";
  }
  return "unknown";
}

const std::vector<std::string>& default_error_keywords() {
  static const std::vector<std::string> keywords{
      "error", "traceback", "exception", "not found", "permission denied", "timeout"};
  return keywords;
}

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains_error_keyword(const std::string& result, const std::vector<std::string>& keywords) {
  std::string lowered = to_lower(result);
  for (const auto& keyword : keywords) {
    if (lowered.find(to_lower(keyword)) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

ValidationReport validate_chain(const ToolChain& chain, const ValidationOptions& options) {
  const auto& keywords =
      options.error_keywords.empty() ? default_error_keywords() : options.error_keywords;

  ValidationReport report;
  if (chain.empty()) {
    report.failures.push_back({PsiRule::EmptyChain, 0});
  }
  for (const auto& call : chain.calls) {
    if (call.tool == ToolKind::EditFile) {
      report.failures.push_back({PsiRule::ContainsEditFile, 0});
      break;
    }
  }
  for (const auto& call : chain.calls) {
    if (contains_error_keyword(call.result, keywords)) {
      report.failures.push_back({PsiRule::ErrorKeywordInResult, call.step});
    }
  }
  bool has_write = std::any_of(chain.calls.begin(), chain.calls.end(),
                               [](const ToolCall& c) { return c.tool == ToolKind::WriteFile; });
  if (!has_write) {
    report.failures.push_back({PsiRule::NoWriteFile, 0});
  }
  report.valid = report.failures.empty();
  return report;
}

// ---------------------------------------------------------------------------
// Extraction pass 1
// ---------------------------------------------------------------------------

std::string clean_result(std::string_view raw) {
  size_t begin = 0;
  size_t end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  return std::string(raw.substr(begin, end - begin));
}

namespace {

bool is_date_command(const std::string& command) {
  std::string trimmed = clean_result(command);
  return trimmed == "date" || trimmed.rfind("date ", 0) == 0;
}

}  // namespace

ExtractionContext collect_info(const ToolChain& chain) {
  ExtractionContext ctx;
  for (const auto& call : chain.calls) {
    ctx.cleaned_results[call.step] = clean_result(call.result);
    if (call.tool == ToolKind::ReadFile) {
      ctx.read_snippets[call.step] = call.result;
      ctx.last_read_path = call.args.at("path");
    }
    if (call.tool == ToolKind::Bash && is_date_command(call.args.at("command"))) {
      ctx.date_step_indices.insert(call.step);
    }
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Datetime literals
// ---------------------------------------------------------------------------

std::string_view to_string(TimeFormat format) {
  switch (format) {
    case TimeFormat::IsoSecondsT:
      return "iso_seconds_T";
    case TimeFormat::IsoSecondsSpace:
      return "iso_seconds_space";
    case TimeFormat::IsoMinutesT:
      return "iso_minutes_T";
    case TimeFormat::IsoMinutesSpace:
      return "iso_minutes_space";
  }
  return "unknown";
}

TimeFormat time_format_from_string(std::string_view name) {
  if (name == "iso_seconds_T") return TimeFormat::IsoSecondsT;
  if (name == "iso_seconds_space") return TimeFormat::IsoSecondsSpace;
  if (name == "iso_minutes_T") return TimeFormat::IsoMinutesT;
  if (name == "iso_minutes_space") return TimeFormat::IsoMinutesSpace;
  throw ParseError("unknown time format \"" + std::string(name) + "\"");
}

std::string format_datetime(TimePoint tp, TimeFormat format) {
  CivilTime c = civil_from(tp);
  char sep = (format == TimeFormat::IsoSecondsT || format == TimeFormat::IsoMinutesT) ? 'T' : ' ';
  bool seconds =
      format == TimeFormat::IsoSecondsT || format == TimeFormat::IsoSecondsSpace;
  char buf[24];
  if (seconds) {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u%c%02u:%02u:%02u", c.year, c.month, c.day, sep,
                  c.hour, c.minute, c.second);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u%c%02u:%02u", c.year, c.month, c.day, sep,
                  c.hour, c.minute);
  }
  return buf;
}

namespace {

bool digits_at(std::string_view s, size_t pos, size_t count) {
  if (pos + count > s.size()) return false;
  for (size_t i = 0; i < count; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace

std::vector<DatetimeMatch> match_datetime(std::string_view text) {
  std::vector<DatetimeMatch> out;
  size_t i = 0;
  while (i < text.size()) {
    // date core: YYYY-MM-DD
    if (!(digits_at(text, i, 4) && i + 9 < text.size() && text[i + 4] == '-' &&
          digits_at(text, i + 5, 2) && text[i + 7] == '-' && digits_at(text, i + 8, 2))) {
      ++i;
      continue;
    }
    DatetimeMatch m{i, 10, DatetimeVariant::DateOnly};
    // [T ]HH:MM extension
    if (i + 15 < text.size() && (text[i + 10] == 'T' || text[i + 10] == ' ') &&
        digits_at(text, i + 11, 2) && text[i + 13] == ':' && digits_at(text, i + 14, 2)) {
      bool t_sep = text[i + 10] == 'T';
      m.len = 16;
      m.variant = t_sep ? DatetimeVariant::IsoMinutesT : DatetimeVariant::IsoMinutesSpace;
      // :SS extension
      if (i + 18 < text.size() && text[i + 16] == ':' && digits_at(text, i + 17, 2)) {
        m.len = 19;
        m.variant = t_sep ? DatetimeVariant::IsoSecondsT : DatetimeVariant::IsoSecondsSpace;
      }
    }
    out.push_back(m);
    i += m.len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extraction pass 2
// ---------------------------------------------------------------------------

std::vector<PlaceholderRef> scan_placeholders(std::string_view text) {
  std::vector<PlaceholderRef> out;
  size_t i = 0;
  while (i < text.size()) {
    size_t open = text.find("{{", i);
    if (open == std::string_view::npos) break;
    size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    std::string_view token = text.substr(open + 2, close - open - 2);
    PlaceholderRef ref;
    ref.pos = open;
    ref.len = close + 2 - open;
    bool known = true;
    if (token == "current_time") {
      ref.kind = PlaceholderRef::Kind::CurrentTime;
    } else if (token == "current_date") {
      ref.kind = PlaceholderRef::Kind::CurrentDate;
    } else if (token == "prev_content") {
      ref.kind = PlaceholderRef::Kind::PrevContent;
    } else if (token.size() > 12 && token.substr(0, 5) == "step_" &&
               token.substr(token.size() - 7) == "_result" &&
               digits_at(token, 5, token.size() - 12)) {
      ref.kind = PlaceholderRef::Kind::StepResult;
      int step = 0;
      for (char c : token.substr(5, token.size() - 12)) step = step * 10 + (c - '0');
      ref.step = step;
    } else {
      known = false;
    }
    if (known) {
      out.push_back(ref);
      i = close + 2;
    } else {
      i = open + 1;
    }
  }
  return out;
}

namespace {

// Template text under construction. Placeholder segments are atomic: later
// replacements and datetime scrubbing only ever see literal segments, which
// is what keeps a longer match from being fragmented by a shorter one.
struct Segment {
  bool is_placeholder = false;
  std::string text;
};

using SegmentList = std::vector<Segment>;

SegmentList initial_segments(const std::string& text) {
  if (text.empty()) return {};
  return {Segment{false, text}};
}

void replace_in_segments(SegmentList& segments, const std::string& value,
                         const std::string& placeholder) {
  SegmentList out;
  out.reserve(segments.size());
  for (auto& segment : segments) {
    if (segment.is_placeholder || value.empty()) {
      out.push_back(std::move(segment));
      continue;
    }
    const std::string& text = segment.text;
    size_t cursor = 0;
    size_t hit = text.find(value);
    if (hit == std::string::npos) {
      out.push_back(std::move(segment));
      continue;
    }
    while (hit != std::string::npos) {
      if (hit > cursor) out.push_back({false, text.substr(cursor, hit - cursor)});
      out.push_back({true, placeholder});
      cursor = hit + value.size();
      hit = text.find(value, cursor);
    }
    if (cursor < text.size()) out.push_back({false, text.substr(cursor)});
  }
  segments = std::move(out);
}

void scrub_datetimes(SegmentList& segments, std::optional<TimeFormat>& first_time_variant) {
  SegmentList out;
  out.reserve(segments.size());
  for (auto& segment : segments) {
    if (segment.is_placeholder) {
      out.push_back(std::move(segment));
      continue;
    }
    const std::string& text = segment.text;
    auto matches = match_datetime(text);
    if (matches.empty()) {
      out.push_back(std::move(segment));
      continue;
    }
    size_t cursor = 0;
    for (const auto& m : matches) {
      if (m.pos > cursor) out.push_back({false, text.substr(cursor, m.pos - cursor)});
      if (m.variant == DatetimeVariant::DateOnly) {
        out.push_back({true, "{{current_date}}"});
      } else {
        out.push_back({true, "{{current_time}}"});
        if (!first_time_variant) {
          switch (m.variant) {
            case DatetimeVariant::IsoSecondsT:
              first_time_variant = TimeFormat::IsoSecondsT;
              break;
            case DatetimeVariant::IsoSecondsSpace:
              first_time_variant = TimeFormat::IsoSecondsSpace;
              break;
            case DatetimeVariant::IsoMinutesT:
              first_time_variant = TimeFormat::IsoMinutesT;
              break;
            case DatetimeVariant::IsoMinutesSpace:
              first_time_variant = TimeFormat::IsoMinutesSpace;
              break;
            case DatetimeVariant::DateOnly:
              break;
          }
        }
      }
      cursor = m.pos + m.len;
    }
    if (cursor < text.size()) out.push_back({false, text.substr(cursor)});
  }
  segments = std::move(out);
}

std::string assemble(const SegmentList& segments) {
  std::string out;
  for (const auto& segment : segments) out += segment.text;
  return out;
}

struct Candidate {
  std::string placeholder;
  std::string value;
  int step_order = 0;  // source step for tie-breaks
  bool is_prev = false;
};

}  // namespace

LoopSkill build_steps(const ToolChain& chain, const ExtractionContext& ctx,
                      const CompileOptions& options) {
  std::set<int> retained_steps;
  std::vector<const ToolCall*> retained;
  for (const auto& call : chain.calls) {
    if (ctx.date_step_indices.count(call.step)) continue;
    retained.push_back(&call);
    retained_steps.insert(call.step);
  }

  LoopSkill skill;
  std::optional<TimeFormat> first_time_variant;

  for (const ToolCall* call : retained) {
    SkillStep step;
    step.original_step = call->step;
    step.tool = call->tool;

    if (call->tool != ToolKind::WriteFile) {
      step.args = call->args;
      skill.steps.push_back(std::move(step));
      continue;
    }

    std::vector<Candidate> candidates;
    for (const ToolCall* earlier : retained) {
      if (earlier->step >= call->step) break;
      const std::string& value = ctx.cleaned_results.at(earlier->step);
      candidates.push_back({"{{step_" + std::to_string(earlier->step) + "_result}}", value,
                            earlier->step, false});
    }
    int last_read_before = 0;
    for (const auto& c : chain.calls) {
      if (c.step >= call->step) break;
      if (c.tool == ToolKind::ReadFile) last_read_before = c.step;
    }
    if (last_read_before != 0) {
      candidates.push_back(
          {"{{prev_content}}", ctx.read_snippets.at(last_read_before), INT_MAX, true});
    }

    // The length floor screens out short generic step results ("ok", "25")
    // that would corrupt unrelated text. The read snippet is a deliberate
    // read-before-write binding, so it only has to be non-empty.
    std::erase_if(candidates, [&](const Candidate& c) {
      if (c.is_prev) return c.value.empty();
      return c.value.size() < options.min_match_len;
    });

    // Greedy longest-first; ties go to the smaller source step, with
    // prev_content after equal-length step results.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.value.size() != b.value.size()) {
                         return a.value.size() > b.value.size();
                       }
                       if (a.is_prev != b.is_prev) return b.is_prev;
                       return a.step_order < b.step_order;
                     });

    SegmentList content = initial_segments(call->args.at("content"));
    for (const auto& candidate : candidates) {
      replace_in_segments(content, candidate.value, candidate.placeholder);
    }
    scrub_datetimes(content, first_time_variant);

    SegmentList path = initial_segments(call->args.at("path"));
    scrub_datetimes(path, first_time_variant);

    std::string content_template = assemble(content);
    if (content_template.empty()) {
      throw CompileError("write step " + std::to_string(call->step) +
                         " has empty content after extraction");
    }
    step.args = ArgMap{{"path", assemble(path)}, {"content", std::move(content_template)}};
    skill.steps.push_back(std::move(step));
  }

  skill.time_format = first_time_variant.value_or(TimeFormat::IsoSecondsT);

  // Audit the produced templates: step references must point at retained
  // earlier steps and prev_content needs a preceding read_file.
  for (const auto& step : skill.steps) {
    for (const auto& [key, value] : step.args) {
      for (const auto& ref : scan_placeholders(value)) {
        if (ref.kind == PlaceholderRef::Kind::StepResult) {
          if (!retained_steps.count(ref.step) || ref.step >= step.original_step) {
            throw CompileError("template references step " + std::to_string(ref.step) +
                               " which is not a retained earlier step");
          }
        } else if (ref.kind == PlaceholderRef::Kind::PrevContent) {
          bool has_read = false;
          for (const ToolCall* c : retained) {
            if (c->step >= step.original_step) break;
            if (c->tool == ToolKind::ReadFile) has_read = true;
          }
          if (!has_read) {
            throw CompileError("template uses prev_content but no read_file precedes step " +
                               std::to_string(step.original_step));
          }
        }
      }
    }
  }

  return skill;
}

LoopSkill compile_skill(const std::string& task_id, const ToolChain& chain, TimePoint created_at,
                        const CompileOptions& options) {
  ExtractionContext ctx = collect_info(chain);
  LoopSkill skill = build_steps(chain, ctx, options);
  skill.task_id = task_id;
  skill.created_at = created_at;
  skill.source_chain_digest = chain_digest(chain);
  return skill;
}

std::string chain_digest(const ToolChain& chain) {
  std::string bytes = serialize_chain(chain);
  uint64_t hash = 1469598103934665603ull;  // FNV offset basis
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;  // FNV prime
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

nlohmann::ordered_json skill_to_json(const LoopSkill& skill) {
  nlohmann::ordered_json j;
  j["task_id"] = skill.task_id;
  j["time_format"] = std::string(to_string(skill.time_format));
  j["created_at"] = format_timestamp(skill.created_at);
  j["source_chain_digest"] = skill.source_chain_digest;
  j["steps"] = nlohmann::ordered_json::array();
  for (const auto& step : skill.steps) {
    nlohmann::ordered_json s;
    s["original_step"] = step.original_step;
    s["tool"] = std::string(to_string(step.tool));
    s["args"] = args_to_ordered_json(step.tool, step.args);
    j["steps"].push_back(std::move(s));
  }
  return j;
}

LoopSkill skill_from_json(const nlohmann::json& j) {
  try {
    LoopSkill skill;
    skill.task_id = j.at("task_id").get<std::string>();
    skill.time_format = time_format_from_string(j.at("time_format").get<std::string>());
    skill.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    skill.source_chain_digest = j.at("source_chain_digest").get<std::string>();
    for (const auto& s : j.at("steps")) {
      SkillStep step;
      step.original_step = s.at("original_step").get<int>();
      step.tool = tool_from_string(s.at("tool").get<std::string>());
      for (const auto& [key, value] : s.at("args").items()) {
        step.args[key] = value.get<std::string>();
      }
      check_args(step.tool, step.args);
      skill.steps.push_back(std::move(step));
    }
    return skill;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed skill document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CorruptionError(std::string("malformed skill document: ") + e.what());
  } catch (const ParseError& e) {
    throw CorruptionError(std::string("malformed skill document: ") + e.what());
  }
}

std::string serialize_skill(const LoopSkill& skill) { return skill_to_json(skill).dump(2) + "\n"; }

LoopSkill deserialize_skill(std::string_view bytes) {
  nlohmann::json j = nlohmann::json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw CorruptionError("skill document is not valid JSON");
  return skill_from_json(j);
}

std::string save_skill(const LoopSkill& skill, const StorePaths& paths) {
  if (skill.steps.empty()) throw CompileError("refusing to save a skill with no steps");
  fs::path dir = paths.skill_dir_for(skill.task_id);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create skill directory " + dir.string());
  fs::path file = dir / "skill.json";
  atomic_write(file, serialize_skill(skill));
  fs::path root = paths.config_path.parent_path();
  fs::path rel = fs::relative(file, root, ec);
  if (ec || rel.empty() || *rel.begin() == "..") return file.string();
  return rel.generic_string();
}

LoopSkill load_skill(const StorePaths& paths, const std::string& skill_ref) {
  fs::path p(skill_ref);
  if (p.is_relative()) p = paths.config_path.parent_path() / p;
  auto bytes = read_file_if_exists(p);
  if (!bytes) throw NotFoundError("skill document not found: " + p.string());
  return deserialize_skill(*bytes);
}

LoopSkill load_skill_for_task(const StorePaths& paths, const std::string& task_id) {
  fs::path p = paths.skill_file_for(task_id);
  auto bytes = read_file_if_exists(p);
  if (!bytes) throw NotFoundError("skill document not found: " + p.string());
  return deserialize_skill(*bytes);
}

}  // namespace loopskill
