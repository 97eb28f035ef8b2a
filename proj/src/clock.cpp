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

#include "loopskill/clock.hpp"

#include <cstdio>

#include "loopskill/errors.hpp"

namespace loopskill {

namespace {

namespace chrono = std::chrono;

bool all_digits(std::string_view s) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return !s.empty();
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

CivilTime civil_from(TimePoint tp) {
  auto dp = chrono::floor<chrono::days>(tp);
  chrono::year_month_day ymd{dp};
  chrono::hh_mm_ss hms{tp - dp};
  CivilTime out;
  out.year = static_cast<int>(ymd.year());
  out.month = static_cast<unsigned>(ymd.month());
  out.day = static_cast<unsigned>(ymd.day());
  out.hour = static_cast<unsigned>(hms.hours().count());
  out.minute = static_cast<unsigned>(hms.minutes().count());
  out.second = static_cast<unsigned>(hms.seconds().count());
  return out;
}

TimePoint make_time(int year, unsigned month, unsigned day, unsigned hour,
                    unsigned minute, unsigned second) {
  auto ymd = chrono::year{year} / chrono::month{month} / chrono::day{day};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59) {
    throw ParseError("invalid civil time");
  }
  return TimePoint{chrono::sys_days{ymd}} + chrono::hours{hour} + chrono::minutes{minute} +
         chrono::seconds{second};
}

int minute_of_day(TimePoint tp) {
  auto dp = chrono::floor<chrono::days>(tp);
  return static_cast<int>(chrono::duration_cast<chrono::minutes>(tp - dp).count());
}

std::string format_date(TimePoint tp) {
  CivilTime c = civil_from(tp);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  return buf;
}

std::string format_timestamp(TimePoint tp) {
  CivilTime c = civil_from(tp);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02u:%02u:%02uZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
  return buf;
}

TimePoint parse_timestamp(std::string_view text) {
  std::string_view s = text;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  // YYYY-MM-DDTHH:MM:SS
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    throw ParseError("invalid timestamp: \"" + std::string(text) + "\"");
  }
  auto year = s.substr(0, 4);
  auto month = s.substr(5, 2);
  auto day = s.substr(8, 2);
  auto hour = s.substr(11, 2);
  auto minute = s.substr(14, 2);
  auto second = s.substr(17, 2);
  for (auto part : {year, month, day, hour, minute, second}) {
    if (!all_digits(part)) {
      throw ParseError("invalid timestamp: \"" + std::string(text) + "\"");
    }
  }
  return make_time(to_int(year), to_int(month), to_int(day), to_int(hour), to_int(minute),
                   to_int(second));
}

}  // namespace loopskill
